//! Adam with decoupled weight decay.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamWConfig {
    pub learning_rate: f64,
    pub betas: (f64, f64),
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            learning_rate: 1e-3,
            betas: (0.9, 0.999),
            eps: 1e-8,
            weight_decay: 1e-4,
        }
    }
}

impl AdamWConfig {
    pub fn validate(&self) -> Result<()> {
        let (b1, b2) = self.betas;
        if !(self.learning_rate > 0.0) {
            return Err(Error::config("learning_rate must be positive"));
        }
        if !((0.0..1.0).contains(&b1) && (0.0..1.0).contains(&b2)) {
            return Err(Error::config("betas must lie in [0, 1)"));
        }
        if !(self.eps > 0.0) || self.weight_decay < 0.0 {
            return Err(Error::config("eps must be positive and weight_decay non-negative"));
        }
        Ok(())
    }
}

/// Moment estimates for one parameter tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub steps: u64,
}

/// Optimizer state for a fixed list of parameter groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamW {
    pub config: AdamWConfig,
    groups: Vec<Moments>,
}

impl AdamW {
    /// One zeroed state per group, sized by `sizes`.
    pub fn new(config: AdamWConfig, sizes: &[usize]) -> Result<Self> {
        config.validate()?;
        Ok(AdamW {
            config,
            groups: sizes
                .iter()
                .map(|&n| Moments {
                    first: vec![0.0; n],
                    second: vec![0.0; n],
                    steps: 0,
                })
                .collect(),
        })
    }

    pub fn group(&self, index: usize) -> &Moments {
        &self.groups[index]
    }

    /// Updates `params` of group `index` in place:
    /// `θ ← θ − lr·wd·θ − lr · m̂ / (√v̂ + eps)`.
    pub fn step(&mut self, index: usize, params: &mut [f64], grads: &[f64]) {
        let AdamWConfig {
            learning_rate: lr,
            betas: (b1, b2),
            eps,
            weight_decay: wd,
        } = self.config;
        let state = &mut self.groups[index];
        assert_eq!(params.len(), state.first.len(), "parameter group size changed");
        assert_eq!(grads.len(), params.len(), "gradient size mismatch");
        state.steps += 1;
        let c1 = 1.0 - b1.powi(state.steps as i32);
        let c2 = 1.0 - b2.powi(state.steps as i32);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(state.first.iter_mut())
            .zip(state.second.iter_mut())
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * wd * *p;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        }
    }
}
