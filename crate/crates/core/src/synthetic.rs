//! Gaussian class clusters with designated confusable pairs.
//!
//! Class means sit on distinct random coordinate axes, scaled so that any
//! two of them are `separation` apart. For a confusable pair `(a, b)` the
//! mean of `b` is moved to `μ_a + confusable_separation · σ · v` for a random
//! unit vector `v`, which leaves the pair's Bayes accuracy at
//! `Φ(confusable_separation / 2)`. With `axis_aligned_confusion` the offset
//! `v` is a coordinate axis unused by any class mean, so the pair differs in
//! a single feature.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{write_dataset, Dataset, Sample};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub dim: usize,
    /// Distance between the means of two ordinary classes.
    pub separation: f64,
    /// Within-class standard deviation, shared by every coordinate.
    pub sigma: f64,
    pub confusable_pairs: Vec<(usize, usize)>,
    /// Distance between the means of a confusable pair, in units of `sigma`.
    pub confusable_separation: f64,
    pub axis_aligned_confusion: bool,
    pub n_per_class: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            classes: 10,
            dim: 32,
            separation: 2.0 * std::f64::consts::SQRT_2,
            sigma: 1.0,
            confusable_pairs: vec![(0, 8), (1, 9)],
            confusable_separation: 0.5,
            axis_aligned_confusion: false,
            n_per_class: 600,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes == 0 || self.dim == 0 || self.n_per_class == 0 {
            return Err(Error::config(
                "classes, dim and n_per_class must all be positive",
            ));
        }
        if !(self.separation > 0.0 && self.sigma > 0.0) {
            return Err(Error::config("separation and sigma must be positive"));
        }
        if self.confusable_separation < 0.0 {
            return Err(Error::config("confusable_separation must be non-negative"));
        }
        for &(a, b) in &self.confusable_pairs {
            if a >= self.classes || b >= self.classes || a == b {
                return Err(Error::config(format!("invalid confusable pair ({a}, {b})")));
            }
        }
        Ok(())
    }

    /// Class means as rows.
    pub fn means(&self) -> Result<Vec<Vec<f64>>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x6d65_616e);
        let scale = self.separation / std::f64::consts::SQRT_2;
        let mut means = vec![vec![0.0; self.dim]; self.classes];
        let mut axes: Vec<usize> = (0..self.dim).collect();
        axes.shuffle(&mut rng);
        let mut spare = axes.iter().skip(self.classes).copied();
        if self.classes <= self.dim {
            for (c, mean) in means.iter_mut().enumerate() {
                mean[axes[c]] = scale;
            }
        } else {
            for mean in &mut means {
                *mean = unit_vector(self.dim, &mut rng)
                    .into_iter()
                    .map(|v| v * scale)
                    .collect();
            }
        }
        for &(a, b) in &self.confusable_pairs {
            let v = match spare.next().filter(|_| self.axis_aligned_confusion) {
                Some(axis) => {
                    let mut v = vec![0.0; self.dim];
                    v[axis] = 1.0;
                    v
                }
                None => unit_vector(self.dim, &mut rng),
            };
            let shift = self.confusable_separation * self.sigma;
            means[b] = means[a].iter().zip(&v).map(|(m, v)| m + shift * v).collect();
        }
        Ok(means)
    }
}

fn unit_vector(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Draws `n_per_class` samples of every class, interleaved by class.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    let means = spec.means()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut samples = Vec::with_capacity(spec.classes * spec.n_per_class);
    for _ in 0..spec.n_per_class {
        for (label, mean) in means.iter().enumerate() {
            let features = mean
                .iter()
                .map(|m| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    m + spec.sigma * z
                })
                .collect();
            samples.push(Sample {
                features,
                label,
                task_id: 0,
                arrival_index: samples.len() as u64,
            });
        }
    }
    Ok(Dataset {
        samples,
        dim: spec.dim,
        classes: spec.classes,
    })
}

/// Generates and writes `<dir>/<stem>.json` with its binary payloads.
pub fn write_synthetic(spec: &SyntheticSpec, dir: impl AsRef<Path>, stem: &str) -> Result<PathBuf> {
    write_dataset(&generate_synthetic(spec)?, dir, stem)
}
