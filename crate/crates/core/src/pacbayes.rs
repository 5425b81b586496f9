//! Terms of a task-sequential PAC-Bayes bound, computed from run artifacts.
//!
//! With `T` tasks, `m_t = min(v_s, v_m)·Δ_t` trained samples on task `t` and
//! a loss bounded by `K`, the bound on the summed expected risk reads
//!
//! ```text
//! Σ R̂_t + Σ λK²/(2 m_t) + Σ KL(Q_t ‖ Q_{t−1})/λ + T ln(T/δ)/λ
//! ```
//!
//! The posteriors are proxied by isotropic Gaussians centred on the
//! parameters at the end of each task, which makes every KL a scaled squared
//! distance. This is a diagnostic: nothing here feeds back into training.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::RunLog;

pub const DEFAULT_DELTA: f64 = 0.05;
pub const DEFAULT_SIGMA: f64 = 0.1;

/// Observed quantities of one task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskTerms {
    pub m: f64,
    pub empirical_risk: f64,
    pub kl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub k: f64,
    pub lambda: f64,
    pub delta: f64,
    pub tasks: Vec<TaskTerms>,
    /// Use `λK²/(2 m_t)`; when false the factor ½ is dropped.
    pub half_factor: bool,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0 && self.lambda > 0.0) {
            return Err(Error::config("K and lambda must be positive"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::config("delta must lie in (0, 1)"));
        }
        if self.tasks.is_empty() {
            return Err(Error::config("at least one task is required"));
        }
        if self.tasks.iter().any(|t| t.m < 1.0 || t.kl < 0.0) {
            return Err(Error::config("every m_t must be at least 1 and every KL non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundTerms {
    pub empirical_risk: f64,
    pub throughput_term: f64,
    pub divergence_term: f64,
    pub confidence_term: f64,
    pub total: f64,
}

pub fn bound_terms(inputs: &BoundInputs) -> BoundTerms {
    let BoundInputs {
        k, lambda, delta, ..
    } = *inputs;
    let t = inputs.tasks.len() as f64;
    let denom = if inputs.half_factor { 2.0 } else { 1.0 };
    let empirical_risk: f64 = inputs.tasks.iter().map(|t| t.empirical_risk).sum();
    let throughput_term: f64 = inputs
        .tasks
        .iter()
        .map(|task| lambda * k * k / (denom * task.m))
        .sum();
    let divergence_term: f64 = inputs.tasks.iter().map(|task| task.kl / lambda).sum();
    let confidence_term = t * (t / delta).ln() / lambda;
    BoundTerms {
        empirical_risk,
        throughput_term,
        divergence_term,
        confidence_term,
        total: empirical_risk + throughput_term + divergence_term + confidence_term,
    }
}

/// `‖μ_t − μ_{t−1}‖² / (2σ²)`.
pub fn gaussian_kl(mean: &[f64], previous: &[f64], sigma: f64) -> Result<f64> {
    if mean.len() != previous.len() {
        return Err(Error::DimensionMismatch {
            expected: previous.len(),
            found: mean.len(),
            context: "KL parameter vectors".into(),
        });
    }
    if !(sigma > 0.0) {
        return Err(Error::config("sigma must be positive"));
    }
    let sq: f64 = mean.iter().zip(previous).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sq / (2.0 * sigma * sigma))
}

/// `λ ∈ {2⁻¹⁰, …, 2¹⁰}` minimizing the total, with its terms.
pub fn optimize_lambda(inputs: &BoundInputs) -> (f64, BoundTerms) {
    let mut best: Option<(f64, BoundTerms)> = None;
    for e in -10..=10 {
        let lambda = 2f64.powi(e);
        let terms = bound_terms(&BoundInputs {
            lambda,
            ..inputs.clone()
        });
        if best.is_none_or(|(_, b)| terms.total < b.total) {
            best = Some((lambda, terms));
        }
    }
    best.expect("grid is non-empty")
}

/// Settings of the report derived from a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PacBayesConfig {
    pub k: f64,
    /// Fixed λ; `None` searches the grid.
    pub lambda: Option<f64>,
    pub delta: f64,
    pub sigma: f64,
    pub half_factor: bool,
}

impl Default for PacBayesConfig {
    fn default() -> Self {
        PacBayesConfig {
            k: 1.0,
            lambda: None,
            delta: DEFAULT_DELTA,
            sigma: DEFAULT_SIGMA,
            half_factor: true,
        }
    }
}

/// Bound report of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacBayesReport {
    pub posterior: String,
    pub sigma: f64,
    pub lambda: f64,
    pub delta: f64,
    pub k: f64,
    pub half_factor: bool,
    pub tasks: Vec<TaskTerms>,
    pub terms: BoundTerms,
}

/// Builds the bound from a run: `m_t` is the number of trained samples,
/// the empirical risk is the online 0-1 error and each KL compares the
/// parameters at consecutive task ends (the first against initialization).
pub fn report_from_run(log: &RunLog, cfg: &PacBayesConfig) -> Result<PacBayesReport> {
    let mut tasks = Vec::new();
    for (t, record) in log.throughput.iter().enumerate() {
        let (Some(prev), Some(cur)) = (log.task_parameters.get(t), log.task_parameters.get(t + 1)) else {
            break;
        };
        tasks.push(TaskTerms {
            m: (record.processed as f64).max(1.0),
            empirical_risk: log.task_online_error.get(t).copied().unwrap_or(0.0),
            kl: gaussian_kl(cur, prev, cfg.sigma)?,
        });
    }
    let mut inputs = BoundInputs {
        k: cfg.k,
        lambda: cfg.lambda.unwrap_or(1.0),
        delta: cfg.delta,
        tasks,
        half_factor: cfg.half_factor,
    };
    inputs.validate()?;
    let (lambda, terms) = match cfg.lambda {
        Some(l) => (l, bound_terms(&inputs)),
        None => optimize_lambda(&inputs),
    };
    inputs.lambda = lambda;
    Ok(PacBayesReport {
        posterior: format!("isotropic Gaussian proxy centred on task-end parameters, sigma = {}", cfg.sigma),
        sigma: cfg.sigma,
        lambda,
        delta: cfg.delta,
        k: cfg.k,
        half_factor: cfg.half_factor,
        tasks: inputs.tasks,
        terms,
    })
}
