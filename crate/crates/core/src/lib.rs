//! Online continual learning over precomputed features, under a stream that
//! arrives faster than the model can train.
//!
//! The pieces, in data order:
//!
//! - [`stream`] builds task-ordered streams and simulates the arrival clock;
//! - [`buffer`] is the reservoir memory and its access budget;
//! - [`classifier`] holds the adapter and head, plus the NCM classifier;
//! - [`losses`] and [`optim`] define the training objective and AdamW;
//! - [`trainer`] runs iterations, targeted replay and the freeze gate;
//! - [`metrics`] and [`pacbayes`] score runs;
//! - [`experiment`] sweeps seeds and settings and writes artifacts.
//!
//! ```
//! use ocl_core::experiment::{run_experiment, ExperimentSpec};
//! use ocl_core::synthetic::SyntheticSpec;
//!
//! let mut spec = ExperimentSpec::default();
//! spec.data.synthetic = Some(SyntheticSpec { n_per_class: 30, ..SyntheticSpec::default() });
//! spec.seeds = vec![0, 1];
//! let outcome = run_experiment(&spec, None)?;
//! assert!(outcome.all_complete());
//! # Ok::<(), ocl_core::Error>(())
//! ```

pub mod buffer;
pub mod classifier;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod losses;
pub mod metrics;
pub mod optim;
pub mod pacbayes;
pub mod stream;
pub mod synthetic;
pub mod trainer;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/streams.md")]
    mod streams {}
    #[doc = include_str!("../../../book/src/replay.md")]
    mod replay {}
    #[doc = include_str!("../../../book/src/losses.md")]
    mod losses {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/bound.md")]
    mod bound {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
