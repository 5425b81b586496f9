//! Feature dataset ingestion and persistence.
//!
//! A dataset is a JSON manifest pointing at two little-endian binary payloads:
//! `f32` features stored row-major (`n × d`) and `u32` labels. A CSV file with a
//! header row `f0,…,f{d-1},label` is accepted as well; [`load_dataset`] picks
//! the reader from the file extension.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One labeled feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: usize,
    /// Task whose distribution produced the sample.
    pub task_id: usize,
    /// Position in the stream (or row in the source file before streaming).
    pub arrival_index: u64,
}

/// An in-memory labeled dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub dim: usize,
    pub classes: usize,
}

/// On-disk manifest describing a binary dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub n: usize,
    pub d: usize,
    #[serde(rename = "C")]
    pub classes: usize,
    pub feature_file: String,
    pub label_file: String,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Number of samples carrying each label.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }

    /// Splits off a held-out evaluation set containing `fraction` of every class.
    ///
    /// Per class, `floor(count * fraction)` samples (at least one when the class
    /// has two or more members and `fraction > 0`) are moved to the evaluation
    /// side. The selection is a pure function of `seed`; both halves keep file
    /// order.
    pub fn split_eval(&self, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::config(format!(
                "eval fraction must lie in [0, 1), got {fraction}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); self.classes];
        for (i, s) in self.samples.iter().enumerate() {
            by_class[s.label].push(i);
        }
        let mut held_out = vec![false; self.samples.len()];
        for rows in &mut by_class {
            let mut take = (rows.len() as f64 * fraction).floor() as usize;
            if take == 0 && fraction > 0.0 && rows.len() >= 2 {
                take = 1;
            }
            rows.shuffle(&mut rng);
            for &i in rows.iter().take(take) {
                held_out[i] = true;
            }
        }
        let (mut train, mut eval) = (Vec::new(), Vec::new());
        for (i, s) in self.samples.iter().enumerate() {
            if held_out[i] {
                eval.push(s.clone());
            } else {
                train.push(s.clone());
            }
        }
        Ok((
            Dataset {
                samples: train,
                dim: self.dim,
                classes: self.classes,
            },
            Dataset {
                samples: eval,
                dim: self.dim,
                classes: self.classes,
            },
        ))
    }
}

/// Loads a dataset from a JSON manifest (binary payload) or a `.csv` file.
///
/// For CSV input the class count is one more than the largest label seen.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => load_csv(path),
        _ => load_manifest(path),
    }
}

fn load_manifest(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Manifest {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    if manifest.d == 0 || manifest.classes == 0 {
        return Err(Error::Manifest {
            path: path.to_path_buf(),
            message: "d and C must be positive".into(),
        });
    }
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let feature_path = base.join(&manifest.feature_file);
    let label_path = base.join(&manifest.label_file);
    let feature_bytes = fs::read(&feature_path).map_err(|e| Error::io(&feature_path, e))?;
    let label_bytes = fs::read(&label_path).map_err(|e| Error::io(&label_path, e))?;

    let expected_features = manifest.n * manifest.d * 4;
    if feature_bytes.len() != expected_features {
        // Report the payload's implied row width when it divides evenly.
        let found = if manifest.n > 0 && feature_bytes.len() % (4 * manifest.n) == 0 {
            feature_bytes.len() / (4 * manifest.n)
        } else {
            feature_bytes.len() / 4
        };
        return Err(Error::DimensionMismatch {
            expected: manifest.d,
            found,
            context: format!("feature payload {}", feature_path.display()),
        });
    }
    if label_bytes.len() != manifest.n * 4 {
        return Err(Error::DimensionMismatch {
            expected: manifest.n,
            found: label_bytes.len() / 4,
            context: format!("label payload {}", label_path.display()),
        });
    }

    let mut samples = Vec::with_capacity(manifest.n);
    for row in 0..manifest.n {
        let mut features = Vec::with_capacity(manifest.d);
        for column in 0..manifest.d {
            let at = (row * manifest.d + column) * 4;
            let value = f32::from_le_bytes(feature_bytes[at..at + 4].try_into().unwrap());
            if !value.is_finite() {
                return Err(Error::NonFinite { row, column });
            }
            features.push(value as f64);
        }
        let label =
            u32::from_le_bytes(label_bytes[row * 4..row * 4 + 4].try_into().unwrap()) as usize;
        if label >= manifest.classes {
            return Err(Error::LabelOutOfRange {
                row,
                label,
                classes: manifest.classes,
            });
        }
        samples.push(Sample {
            features,
            label,
            task_id: 0,
            arrival_index: row as u64,
        });
    }
    Ok(Dataset {
        samples,
        dim: manifest.d,
        classes: manifest.classes,
    })
}

fn load_csv(path: &Path) -> Result<Dataset> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Manifest {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    })?;
    let headers = reader.headers()?.clone();
    let Some(label_col) = headers.iter().position(|h| h == "label") else {
        return Err(Error::Manifest {
            path: path.to_path_buf(),
            message: "missing `label` column".into(),
        });
    };
    let dim = headers.len() - 1;
    if dim == 0 {
        return Err(Error::Manifest {
            path: path.to_path_buf(),
            message: "no feature columns".into(),
        });
    }

    let mut samples = Vec::new();
    let mut max_label = 0;
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != dim + 1 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: record.len().saturating_sub(1),
                context: format!("csv row {row}"),
            });
        }
        let mut features = Vec::with_capacity(dim);
        let mut label = 0;
        for (column, field) in record.iter().enumerate() {
            if column == label_col {
                label = field.trim().parse::<usize>().map_err(|e| Error::Manifest {
                    path: path.to_path_buf(),
                    message: format!("row {row}: bad label {field:?}: {e}"),
                })?;
                continue;
            }
            let value = field.trim().parse::<f64>().map_err(|e| Error::Manifest {
                path: path.to_path_buf(),
                message: format!("row {row}: bad feature {field:?}: {e}"),
            })?;
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    row,
                    column: features.len(),
                });
            }
            features.push(value);
        }
        max_label = max_label.max(label);
        samples.push(Sample {
            features,
            label,
            task_id: 0,
            arrival_index: row as u64,
        });
    }
    Ok(Dataset {
        classes: if samples.is_empty() { 0 } else { max_label + 1 },
        samples,
        dim,
    })
}

/// Writes `dataset` as `<dir>/<stem>.json` plus `<stem>.features.f32` and
/// `<stem>.labels.u32`, returning the manifest path.
pub fn write_dataset(dataset: &Dataset, dir: impl AsRef<Path>, stem: &str) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = Manifest {
        n: dataset.samples.len(),
        d: dataset.dim,
        classes: dataset.classes,
        feature_file: format!("{stem}.features.f32"),
        label_file: format!("{stem}.labels.u32"),
    };
    let mut features = Vec::with_capacity(manifest.n * manifest.d * 4);
    let mut labels = Vec::with_capacity(manifest.n * 4);
    for s in &dataset.samples {
        if s.features.len() != dataset.dim {
            return Err(Error::DimensionMismatch {
                expected: dataset.dim,
                found: s.features.len(),
                context: "sample features".into(),
            });
        }
        for &v in &s.features {
            features.extend_from_slice(&(v as f32).to_le_bytes());
        }
        labels.extend_from_slice(&(s.label as u32).to_le_bytes());
    }
    let feature_path = dir.join(&manifest.feature_file);
    fs::write(&feature_path, features).map_err(|e| Error::io(&feature_path, e))?;
    let label_path = dir.join(&manifest.label_file);
    fs::write(&label_path, labels).map_err(|e| Error::io(&label_path, e))?;
    let manifest_path = dir.join(format!("{stem}.json"));
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(&manifest_path, text).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest_path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        let samples = (0..4)
            .map(|i| Sample {
                features: vec![i as f64, -(i as f64) * 0.5],
                label: i % 2,
                task_id: 0,
                arrival_index: i as u64,
            })
            .collect();
        Dataset {
            samples,
            dim: 2,
            classes: 2,
        }
    }

    #[test]
    fn manifest_round_trip_preserves_shape() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_dataset(&tiny(), dir.path(), "tiny").unwrap();
        let loaded = load_dataset(&path).unwrap();
        assert_eq!(loaded.len(), 4);
        assert_eq!(loaded.dim, 2);
        assert_eq!(loaded.classes, 2);
        assert!(loaded.samples.iter().all(|s| s.features.len() == 2));
        assert_eq!(loaded, tiny());
    }

    #[test]
    fn declared_dim_larger_than_payload_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_dataset(&tiny(), dir.path(), "tiny").unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let mut m: Manifest = serde_json::from_str(&text).unwrap();
        m.d = 3;
        fs::write(&path, serde_json::to_string(&m).unwrap()).unwrap();
        match load_dataset(&path) {
            Err(Error::DimensionMismatch {
                expected: 3,
                found: 2,
                ..
            }) => {}
            other => panic!("expected dimension mismatch, got {other:?}"),
        }
    }

    #[test]
    fn nan_feature_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_dataset(&tiny(), dir.path(), "tiny").unwrap();
        let fpath = dir.path().join("tiny.features.f32");
        let mut bytes = fs::read(&fpath).unwrap();
        bytes[4..8].copy_from_slice(&f32::NAN.to_le_bytes());
        fs::write(&fpath, bytes).unwrap();
        assert!(matches!(
            load_dataset(&path),
            Err(Error::NonFinite { row: 0, column: 1 })
        ));
    }

    #[test]
    fn missing_payload_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_dataset(&tiny(), dir.path(), "tiny").unwrap();
        fs::remove_file(dir.path().join("tiny.labels.u32")).unwrap();
        assert!(matches!(load_dataset(&path), Err(Error::Io { .. })));
        assert!(matches!(
            load_dataset(dir.path().join("nope.json")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn csv_ingestion() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        fs::write(&path, "f0,f1,label\n1.0,2.0,0\n3.5,-1,2\n").unwrap();
        let ds = load_dataset(&path).unwrap();
        assert_eq!(ds.dim, 2);
        assert_eq!(ds.classes, 3);
        assert_eq!(ds.samples[1].features, vec![3.5, -1.0]);
        assert_eq!(ds.samples[1].label, 2);

        fs::write(&path, "f0,f1,label\n1.0,NaN,0\n").unwrap();
        assert!(matches!(load_dataset(&path), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn eval_split_is_per_class_and_seeded() {
        let samples = (0..100)
            .map(|i| Sample {
                features: vec![i as f64],
                label: i % 4,
                task_id: 0,
                arrival_index: i as u64,
            })
            .collect();
        let ds = Dataset {
            samples,
            dim: 1,
            classes: 4,
        };
        let (train, eval) = ds.split_eval(0.2, 7).unwrap();
        assert_eq!(eval.class_counts(), vec![5, 5, 5, 5]);
        assert_eq!(train.len(), 80);
        let (_, eval2) = ds.split_eval(0.2, 7).unwrap();
        assert_eq!(eval, eval2);
    }
}
