//! Loss terms and their analytic gradients.
//!
//! Every function here is pure and returns `(value, gradient)`. Gradients are
//! with respect to the argument that the trainer back-propagates through:
//! logits for the classification losses, the head weights for the sparsity
//! regularizer and the batch representations for the separation loss.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::classifier::softmax;
use crate::error::{Error, Result};

/// Target Gram matrix of a simplex equiangular tight frame on `C_t` classes:
/// ones on the diagonal and `−1/(C_t − 1)` elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct EtfTargets {
    p: Array2<f64>,
}

impl EtfTargets {
    pub fn new(active: usize) -> Result<Self> {
        if active < 2 {
            return Err(Error::UndefinedEtf(active));
        }
        let off = -1.0 / (active as f64 - 1.0);
        let p = Array2::from_shape_fn((active, active), |(i, j)| if i == j { 1.0 } else { off });
        Ok(EtfTargets { p })
    }

    pub fn active(&self) -> usize {
        self.p.nrows()
    }

    pub fn matrix(&self) -> ArrayView2<'_, f64> {
        self.p.view()
    }
}

/// Value of every term of one update, as logged per step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub ce: f64,
    pub ls: f64,
    pub lp: f64,
    pub lb: f64,
    pub total: f64,
    pub gamma: f64,
}

impl LossBreakdown {
    pub fn new(ce: f64, ls: f64, lp: f64, gamma: f64) -> Self {
        LossBreakdown {
            ce,
            ls,
            lp,
            lb: 0.0,
            total: total_loss(ce, ls, lp, gamma),
            gamma,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.ce, self.ls, self.lp, self.lb, self.total]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// `ce + γ (lp + ls)`.
pub fn total_loss(ce: f64, ls: f64, lp: f64, gamma: f64) -> f64 {
    ce + gamma * (lp + ls)
}

/// Mean cross-entropy over the batch; gradient `(softmax − onehot) / B`.
pub fn cross_entropy(logits: ArrayView2<f64>, labels: &[usize]) -> (f64, Array2<f64>) {
    let b = logits.nrows() as f64;
    let mut grad = Array2::zeros(logits.raw_dim());
    let mut loss = 0.0;
    for ((row, &y), mut g) in logits.axis_iter(Axis(0)).zip(labels).zip(grad.axis_iter_mut(Axis(0))) {
        loss += -log_softmax_at(row, y);
        let mut p = softmax(row);
        p[y] -= 1.0;
        g.assign(&(p / b));
    }
    (loss / b, grad)
}

fn log_softmax_at(row: ArrayView1<f64>, index: usize) -> f64 {
    let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let lse = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
    row[index] - lse
}

/// `L_s = −Σ_c (Σᵢ|wᵢᶜ| / d) / ‖wᶜ‖₂` over the columns of `w` (`d × C`).
///
/// An all-zero column contributes nothing to the value or the gradient.
/// `sign(0)` is taken as 0.
pub fn sparsity_regularizer(w: ArrayView2<f64>) -> (f64, Array2<f64>) {
    let d = w.nrows() as f64;
    let mut grad = Array2::zeros(w.raw_dim());
    let mut loss = 0.0;
    for (col, mut g) in w.axis_iter(Axis(1)).zip(grad.axis_iter_mut(Axis(1))) {
        let norm = col.dot(&col).sqrt();
        if norm == 0.0 {
            continue;
        }
        let abs_sum: f64 = col.iter().map(|v| v.abs()).sum();
        loss -= abs_sum / (d * norm);
        let n3 = norm * norm * norm;
        for (gi, &wi) in g.iter_mut().zip(col.iter()) {
            let sign = if wi > 0.0 {
                1.0
            } else if wi < 0.0 {
                -1.0
            } else {
                0.0
            };
            *gi = -(sign / (d * norm) - abs_sum * wi / (d * n3));
        }
    }
    (loss, grad)
}

/// Value of the separation loss and its gradient with respect to each row
/// of the batch representations.
///
/// The representative of an active class is the mean of its batch
/// representations; a class absent from the batch is represented by
/// `fallback(class)`, which receives no gradient. Representatives are
/// unit-normalized before comparing their Gram matrix to the ETF targets:
/// `L_p = (1/C_t²) Σᵢⱼ (⟨r̂ᵢ, r̂ⱼ⟩ − pᵢⱼ)²`.
pub fn max_separation<F>(
    reps: ArrayView2<f64>,
    labels: &[usize],
    active: &[usize],
    fallback: F,
) -> Result<(f64, Array2<f64>)>
where
    F: Fn(usize) -> Option<Array1<f64>>,
{
    let targets = EtfTargets::new(active.len())?;
    let dim = reps.ncols();
    let c_t = active.len();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); c_t];
    for (i, &y) in labels.iter().enumerate() {
        if let Some(k) = active.iter().position(|&c| c == y) {
            members[k].push(i);
        }
    }
    let mut units = Array2::<f64>::zeros((c_t, dim));
    let mut norms = vec![0.0; c_t];
    for (k, &class) in active.iter().enumerate() {
        let r = if members[k].is_empty() {
            let proto = fallback(class).ok_or(Error::NoPrototypes)?;
            if proto.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: proto.len(),
                    context: "separation fallback".into(),
                });
            }
            proto
        } else {
            let mut sum = Array1::<f64>::zeros(dim);
            for &i in &members[k] {
                sum += &reps.row(i);
            }
            sum / members[k].len() as f64
        };
        let n = r.dot(&r).sqrt();
        if n == 0.0 {
            return Err(Error::ZeroNorm(class));
        }
        norms[k] = n;
        units.row_mut(k).assign(&(r / n));
    }
    let residual = units.dot(&units.t()) - &targets.matrix();
    let scale = 1.0 / (c_t * c_t) as f64;
    let loss = scale * residual.iter().map(|e| e * e).sum::<f64>();

    let grad_units = residual.dot(&units) * (4.0 * scale);
    let mut grad = Array2::zeros(reps.raw_dim());
    for k in 0..c_t {
        if members[k].is_empty() {
            continue;
        }
        let u = units.row(k);
        let g = grad_units.row(k);
        let projected = (&g - &(&u * u.dot(&g))) / norms[k];
        let share = projected / members[k].len() as f64;
        for &i in &members[k] {
            grad.row_mut(i).assign(&share);
        }
    }
    Ok((loss, grad))
}

/// How the two-class probabilities of a confused pair are formed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairSoftmax {
    /// Softmax over the two logits of the pair only.
    #[default]
    Renormalized,
    /// Components of the softmax over all classes.
    Full,
}

/// Summed binary loss over the confused pairs.
///
/// For each pair `(m, n)` and each sample labelled `m` or `n`, adds
/// `−log φ^label`. Samples outside every pair contribute nothing.
pub fn targeted_binary_loss(
    logits: ArrayView2<f64>,
    labels: &[usize],
    pairs: &[(usize, usize)],
    mode: PairSoftmax,
) -> (f64, Array2<f64>) {
    let mut grad = Array2::zeros(logits.raw_dim());
    let mut loss = 0.0;
    for &(m, n) in pairs {
        for (i, &y) in labels.iter().enumerate() {
            let other = if y == m {
                n
            } else if y == n {
                m
            } else {
                continue;
            };
            let row = logits.row(i);
            match mode {
                PairSoftmax::Renormalized => {
                    let pair = Array1::from(vec![row[y], row[other]]);
                    let phi = softmax(pair.view());
                    loss -= log_softmax_at(pair.view(), 0);
                    grad[[i, y]] += phi[0] - 1.0;
                    grad[[i, other]] += phi[1];
                }
                PairSoftmax::Full => {
                    loss -= log_softmax_at(row, y);
                    let mut p = softmax(row);
                    p[y] -= 1.0;
                    let mut g = grad.row_mut(i);
                    g += &p;
                }
            }
        }
    }
    (loss, grad)
}
