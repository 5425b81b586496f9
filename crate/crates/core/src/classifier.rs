//! Prediction heads over precomputed features.
//!
//! The trainable path is `features -> adapter -> linear head -> logits`. The
//! adapter is an optional one-hidden-layer ReLU map standing in for the
//! trainable part of a feature extractor; disabled, it is the identity. The
//! NCM classifier keeps a momentum-updated mean prototype per class and
//! predicts the nearest one in Euclidean distance.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default NCM momentum.
pub const DEFAULT_NCM_MOMENTUM: f64 = 0.1;

fn uniform_fan_in<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<f64> {
    let bound = 1.0 / (rows as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-bound..=bound))
}

/// Final fully connected layer: `logits = Wᵀ r + b`, `W` is `d × C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHead {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl LinearHead {
    pub fn init<R: Rng>(input_dim: usize, classes: usize, rng: &mut R) -> Self {
        LinearHead {
            weights: uniform_fan_in(input_dim, classes, rng),
            bias: Array1::zeros(classes),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn classes(&self) -> usize {
        self.weights.ncols()
    }

    pub fn logits(&self, reps: ArrayView2<f64>) -> Array2<f64> {
        reps.dot(&self.weights) + &self.bias
    }
}

/// Optional ReLU hidden layer in front of the head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adapter {
    pub enabled: bool,
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub frozen: bool,
}

impl Adapter {
    pub fn disabled() -> Self {
        Adapter {
            enabled: false,
            weights: Array2::zeros((0, 0)),
            bias: Array1::zeros(0),
            frozen: false,
        }
    }

    pub fn init<R: Rng>(input_dim: usize, hidden: usize, rng: &mut R) -> Self {
        Adapter {
            enabled: true,
            weights: uniform_fan_in(input_dim, hidden, rng),
            bias: Array1::zeros(hidden),
            frozen: false,
        }
    }

    pub fn hidden(&self) -> usize {
        if self.enabled {
            self.weights.ncols()
        } else {
            0
        }
    }

    /// Pre-activations `X W1 + b1`; `None` when disabled.
    pub fn pre_activation(&self, inputs: ArrayView2<f64>) -> Option<Array2<f64>> {
        self.enabled.then(|| inputs.dot(&self.weights) + &self.bias)
    }
}

/// Adapter plus head, with the shapes checked once at construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub adapter: Adapter,
    pub head: LinearHead,
    pub input_dim: usize,
}

/// Intermediate values of a batched forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub pre_activation: Option<Array2<f64>>,
    pub representations: Array2<f64>,
    pub logits: Array2<f64>,
}

impl Network {
    /// Builds a network; `hidden = None` disables the adapter.
    pub fn init<R: Rng>(input_dim: usize, hidden: Option<usize>, classes: usize, rng: &mut R) -> Self {
        let adapter = match hidden {
            Some(h) => Adapter::init(input_dim, h, rng),
            None => Adapter::disabled(),
        };
        let rep_dim = hidden.unwrap_or(input_dim);
        Network {
            adapter,
            head: LinearHead::init(rep_dim, classes, rng),
            input_dim,
        }
    }

    pub fn new(adapter: Adapter, head: LinearHead, input_dim: usize) -> Result<Self> {
        if adapter.enabled && adapter.weights.nrows() != input_dim {
            return Err(Error::DimensionMismatch {
                expected: input_dim,
                found: adapter.weights.nrows(),
                context: "adapter input".into(),
            });
        }
        let rep_dim = if adapter.enabled {
            adapter.weights.ncols()
        } else {
            input_dim
        };
        if head.input_dim() != rep_dim || head.bias.len() != head.classes() {
            return Err(Error::DimensionMismatch {
                expected: rep_dim,
                found: head.input_dim(),
                context: "head input".into(),
            });
        }
        Ok(Network {
            adapter,
            head,
            input_dim,
        })
    }

    pub fn classes(&self) -> usize {
        self.head.classes()
    }

    pub fn representation_dim(&self) -> usize {
        self.head.input_dim()
    }

    pub fn forward_batch(&self, inputs: ArrayView2<f64>) -> Result<ForwardPass> {
        if inputs.ncols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: inputs.ncols(),
                context: "forward input".into(),
            });
        }
        let pre_activation = self.adapter.pre_activation(inputs);
        let representations = match &pre_activation {
            Some(z) => z.mapv(|v| v.max(0.0)),
            None => inputs.to_owned(),
        };
        let logits = self.head.logits(representations.view());
        Ok(ForwardPass {
            pre_activation,
            representations,
            logits,
        })
    }

    /// Single-sample forward: `(representation, logits)`.
    pub fn forward(&self, features: &[f64]) -> Result<(Array1<f64>, Array1<f64>)> {
        let x = ArrayView2::from_shape((1, features.len()), features).expect("row view");
        let pass = self.forward_batch(x)?;
        Ok((
            pass.representations.row(0).to_owned(),
            pass.logits.row(0).to_owned(),
        ))
    }

    /// All trainable parameters flattened in checkpoint order.
    pub fn parameter_vector(&self) -> Vec<f64> {
        let mut out = Vec::new();
        if self.adapter.enabled {
            out.extend(self.adapter.weights.iter());
            out.extend(self.adapter.bias.iter());
        }
        out.extend(self.head.weights.iter());
        out.extend(self.head.bias.iter());
        out
    }
}

/// Stabilized softmax and argmax with lowest-index tie-break.
pub fn softmax_predict(logits: ArrayView1<f64>) -> (Array1<f64>, usize) {
    let probs = softmax(logits);
    (probs, argmax(logits))
}

pub fn softmax(logits: ArrayView1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let exp = logits.mapv(|v| (v - max).exp());
    let sum = exp.sum();
    exp / sum
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(values: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Argmax restricted to classes with `allowed[c] == true`.
pub fn argmax_masked(values: ArrayView1<f64>, allowed: &[bool]) -> usize {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if allowed.get(i).copied().unwrap_or(false) && best.is_none_or(|b| v > values[b]) {
            best = Some(i);
        }
    }
    best.unwrap_or_else(|| argmax(values))
}

/// Online nearest-class-mean classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NcmState {
    prototypes: Vec<Option<Array1<f64>>>,
    counts_seen: Vec<u64>,
    momentum: f64,
}

impl NcmState {
    pub fn new(classes: usize, momentum: f64) -> Result<Self> {
        if !(momentum > 0.0 && momentum <= 1.0) {
            return Err(Error::config(format!(
                "NCM momentum must lie in (0, 1], got {momentum}"
            )));
        }
        Ok(NcmState {
            prototypes: vec![None; classes],
            counts_seen: vec![0; classes],
            momentum,
        })
    }

    pub fn prototype(&self, class: usize) -> Option<&Array1<f64>> {
        self.prototypes.get(class).and_then(|p| p.as_ref())
    }

    pub fn counts_seen(&self) -> &[u64] {
        &self.counts_seen
    }

    pub fn momentum(&self) -> f64 {
        self.momentum
    }

    /// `μ_c ← (1 − λ) μ_c + λ · mean(batch reps of class c)` for every class
    /// present; a first sighting takes the batch mean directly.
    pub fn update_class_means(&mut self, reps: ArrayView2<f64>, labels: &[usize]) {
        let dim = reps.ncols();
        let classes = self.prototypes.len();
        let mut sums = vec![Array1::<f64>::zeros(dim); classes];
        let mut counts = vec![0usize; classes];
        for (row, &label) in reps.axis_iter(Axis(0)).zip(labels) {
            sums[label] += &row;
            counts[label] += 1;
        }
        for c in 0..classes {
            if counts[c] == 0 {
                continue;
            }
            let mean = &sums[c] / counts[c] as f64;
            self.prototypes[c] = Some(match self.prototypes[c].take() {
                Some(old) => old * (1.0 - self.momentum) + mean * self.momentum,
                None => mean,
            });
            self.counts_seen[c] += counts[c] as u64;
        }
    }

    /// Nearest prototype in Euclidean distance; lowest index wins ties.
    pub fn predict(&self, rep: ArrayView1<f64>) -> Result<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (c, proto) in self.prototypes.iter().enumerate() {
            let Some(proto) = proto else { continue };
            if proto.len() != rep.len() {
                return Err(Error::DimensionMismatch {
                    expected: proto.len(),
                    found: rep.len(),
                    context: "NCM query".into(),
                });
            }
            let dist: f64 = proto
                .iter()
                .zip(rep.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if best.is_none_or(|(_, d)| dist < d) {
                best = Some((c, dist));
            }
        }
        best.map(|(c, _)| c).ok_or(Error::NoPrototypes)
    }
}

/// Metadata written next to a binary parameter payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadCheckpoint {
    pub d: usize,
    pub h: usize,
    #[serde(rename = "C")]
    pub classes: usize,
    pub seed: u64,
    pub adapter_frozen: bool,
    pub payload: String,
}

/// Saves `net` as `<dir>/<stem>.json` plus `<stem>.params.f64` (little-endian).
pub fn save_checkpoint(net: &Network, seed: u64, dir: impl AsRef<Path>, stem: &str) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = HeadCheckpoint {
        d: net.input_dim,
        h: net.adapter.hidden(),
        classes: net.classes(),
        seed,
        adapter_frozen: net.adapter.frozen,
        payload: format!("{stem}.params.f64"),
    };
    let bytes: Vec<u8> = net
        .parameter_vector()
        .into_iter()
        .flat_map(f64::to_le_bytes)
        .collect();
    let payload = dir.join(&meta.payload);
    fs::write(&payload, bytes).map_err(|e| Error::io(&payload, e))?;
    let path = dir.join(format!("{stem}.json"));
    fs::write(&path, serde_json::to_string_pretty(&meta)?).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(Network, HeadCheckpoint)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let meta: HeadCheckpoint = serde_json::from_str(&text)?;
    let payload = path.parent().unwrap_or(Path::new(".")).join(&meta.payload);
    let bytes = fs::read(&payload).map_err(|e| Error::io(&payload, e))?;
    let rep = if meta.h > 0 { meta.h } else { meta.d };
    let expected = if meta.h > 0 { meta.d * meta.h + meta.h } else { 0 } + rep * meta.classes + meta.classes;
    if bytes.len() != expected * 8 {
        return Err(Error::DimensionMismatch {
            expected,
            found: bytes.len() / 8,
            context: "checkpoint payload".into(),
        });
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let mut at = 0;
    let mut take = |n: usize| {
        let slice = values[at..at + n].to_vec();
        at += n;
        slice
    };
    let adapter = if meta.h > 0 {
        Adapter {
            enabled: true,
            weights: Array2::from_shape_vec((meta.d, meta.h), take(meta.d * meta.h)).unwrap(),
            bias: Array1::from(take(meta.h)),
            frozen: meta.adapter_frozen,
        }
    } else {
        Adapter::disabled()
    };
    let head = LinearHead {
        weights: Array2::from_shape_vec((rep, meta.classes), take(rep * meta.classes)).unwrap(),
        bias: Array1::from(take(meta.classes)),
    };
    Ok((Network::new(adapter, head, meta.d)?, meta))
}
