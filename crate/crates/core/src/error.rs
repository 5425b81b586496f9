use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },

    #[error("dimension mismatch: expected {expected}, found {found} ({context})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: String,
    },

    #[error("non-finite feature value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },

    #[error("label {label} out of range for {classes} classes (row {row})")]
    LabelOutOfRange {
        row: usize,
        label: usize,
        classes: usize,
    },

    #[error("schedule references class {0} which has no samples")]
    AbsentClass(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("memory buffer access denied: no access granted at this iteration")]
    AccessDenied,

    #[error("simplex ETF undefined for {0} active classes (need at least 2)")]
    UndefinedEtf(usize),

    #[error("cannot normalize zero-norm representation for class {0}")]
    ZeroNorm(usize),

    #[error("no class prototypes available")]
    NoPrototypes,

    #[error("empty evaluation set")]
    EmptyEvalSet,

    #[error("empty record list")]
    EmptyRecords,

    #[error("non-finite loss at iteration {iteration}")]
    NonFiniteLoss { iteration: u64 },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(message: impl Into<String>) -> Self {
        Error::InvalidConfig(message.into())
    }
}
