//! Evaluation: accuracy, confusion, A_AUC, classifier sparsity, throughput.

use std::fmt::Write as _;

use ndarray::{ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::classifier::{argmax_masked, NcmState, Network};
use crate::dataset::Sample;
use crate::error::{Error, Result};
use crate::stream::ThroughputRecord;

/// Per-column magnitude `m(w)` and mean-to-max ratio `s(w)` of a weight matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityStats {
    pub m: Vec<f64>,
    pub s: Vec<f64>,
    /// Columns whose entries are all zero; their `s` is reported as 1.
    pub zero_columns: Vec<usize>,
}

/// `m(w) = ‖w‖₂` and `s(w) = mean|wᵢ| / max|wᵢ|` for each column of `w`.
pub fn sparsity_stats(w: ArrayView2<f64>) -> SparsityStats {
    let d = w.nrows() as f64;
    let mut stats = SparsityStats {
        m: Vec::with_capacity(w.ncols()),
        s: Vec::with_capacity(w.ncols()),
        zero_columns: Vec::new(),
    };
    for (c, col) in w.axis_iter(Axis(1)).enumerate() {
        let max = col.fold(0.0f64, |m, v| m.max(v.abs()));
        let abs_sum: f64 = col.iter().map(|v| v.abs()).sum();
        stats.m.push(col.dot(&col).sqrt());
        if max == 0.0 {
            stats.s.push(1.0);
            stats.zero_columns.push(c);
        } else {
            stats.s.push(abs_sum / d / max);
        }
    }
    stats
}

/// Row-normalized confusion matrix: entry `[m][n]` is the fraction of class
/// `m` samples predicted as `n`. Rows of absent classes are all zero.
pub fn confusion_matrix(truth: &[usize], predicted: &[usize], classes: usize) -> Vec<Vec<f64>> {
    let mut counts = vec![vec![0usize; classes]; classes];
    for (&t, &p) in truth.iter().zip(predicted) {
        counts[t][p] += 1;
    }
    counts
        .into_iter()
        .map(|row| {
            let total: usize = row.iter().sum();
            row.into_iter()
                .map(|n| if total == 0 { 0.0 } else { n as f64 / total as f64 })
                .collect()
        })
        .collect()
}

/// One evaluation point of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub iteration: u64,
    pub samples_seen: u64,
    pub task: usize,
    pub accuracy_softmax: f64,
    pub accuracy_ncm: f64,
    pub confusion: Vec<Vec<f64>>,
    pub per_class_s: Vec<f64>,
    pub per_class_m: Vec<f64>,
    pub zero_columns: Vec<usize>,
    pub v_m_measured: Option<f64>,
}

impl EvalRecord {
    /// Mean `s(w)` over the given classes, or over all of them when empty.
    pub fn mean_s(&self, classes: &[usize]) -> f64 {
        if classes.is_empty() {
            return self.per_class_s.iter().sum::<f64>() / self.per_class_s.len() as f64;
        }
        classes.iter().map(|&c| self.per_class_s[c]).sum::<f64>() / classes.len() as f64
    }
}

/// Accuracy of both classifiers on `eval`, restricted to `seen` classes.
///
/// Softmax predictions are the argmax over seen classes. The NCM classifier
/// only knows prototypes of classes it has been fed, so it scores 0 on a
/// sample when it has none.
pub fn evaluate(
    net: &Network,
    ncm: &NcmState,
    eval: &[Sample],
    seen: &[bool],
    iteration: u64,
    samples_seen: u64,
) -> Result<EvalRecord> {
    let eval: Vec<&Sample> = eval
        .iter()
        .filter(|s| seen.get(s.label).copied().unwrap_or(false))
        .collect();
    if eval.is_empty() {
        return Err(Error::EmptyEvalSet);
    }
    let classes = net.classes();
    let d = net.input_dim;
    let mut flat = Vec::with_capacity(eval.len() * d);
    for s in &eval {
        if s.features.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: s.features.len(),
                context: "evaluation sample".into(),
            });
        }
        flat.extend_from_slice(&s.features);
    }
    let x = ArrayView2::from_shape((eval.len(), d), &flat).expect("contiguous batch");
    let pass = net.forward_batch(x)?;
    let truth: Vec<usize> = eval.iter().map(|s| s.label).collect();
    let predicted: Vec<usize> = pass
        .logits
        .axis_iter(Axis(0))
        .map(|row| argmax_masked(row, seen))
        .collect();
    let mut ncm_correct = 0usize;
    for (rep, &t) in pass.representations.axis_iter(Axis(0)).zip(&truth) {
        if matches!(ncm.predict(rep), Ok(p) if p == t) {
            ncm_correct += 1;
        }
    }
    let correct = truth.iter().zip(&predicted).filter(|(t, p)| t == p).count();
    let stats = sparsity_stats(net.head.weights.view());
    Ok(EvalRecord {
        iteration,
        samples_seen,
        task: 0,
        accuracy_softmax: correct as f64 / eval.len() as f64,
        accuracy_ncm: ncm_correct as f64 / eval.len() as f64,
        confusion: confusion_matrix(&truth, &predicted, classes),
        per_class_s: stats.s,
        per_class_m: stats.m,
        zero_columns: stats.zero_columns,
        v_m_measured: None,
    })
}

fn spacings(records: &[EvalRecord]) -> Vec<f64> {
    let mut prev = 0u64;
    records
        .iter()
        .map(|r| {
            let dn = r.samples_seen.saturating_sub(prev) as f64;
            prev = r.samples_seen;
            dn
        })
        .collect()
}

/// Area under the accuracy curve, normalized by the total span.
///
/// Each record is weighted by the samples seen since the previous one, so
/// for equally spaced records this is the mean accuracy. If every spacing is
/// zero the plain mean is returned.
pub fn a_auc(records: &[EvalRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    let dn = spacings(records);
    let span: f64 = dn.iter().sum();
    if span == 0.0 {
        let sum: f64 = records.iter().map(|r| r.accuracy_softmax).sum();
        return Ok(sum / records.len() as f64);
    }
    let area: f64 = records
        .iter()
        .zip(&dn)
        .map(|(r, dn)| r.accuracy_softmax * dn)
        .sum();
    Ok(area / span)
}

/// The unnormalized sum `Σ accᵢ · Δnᵢ`.
pub fn a_auc_raw(records: &[EvalRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    Ok(records
        .iter()
        .zip(spacings(records))
        .map(|(r, dn)| r.accuracy_softmax * dn)
        .sum())
}

pub fn last_accuracy(records: &[EvalRecord]) -> Result<f64> {
    records
        .last()
        .map(|r| r.accuracy_softmax)
        .ok_or(Error::EmptyRecords)
}

/// `batch_size / median(batch_times)` in samples per second.
pub fn measure_throughput(batch_times: &[f64], batch_size: usize) -> f64 {
    let mut sorted = batch_times.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    batch_size as f64 / median
}

/// Everything a finished (or aborted) run produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub records: Vec<EvalRecord>,
    pub throughput: Vec<ThroughputRecord>,
    pub iterations: u64,
    pub replay_steps: u64,
    /// Classes of each task, in stream order.
    pub task_classes: Vec<Vec<usize>>,
    /// Online 0-1 error of the softmax head on incoming batches, per task.
    pub task_online_error: Vec<f64>,
    /// Flattened parameters at initialization followed by each task end.
    pub task_parameters: Vec<Vec<f64>>,
    /// `s(w)` of every column at each task end.
    pub task_end_s: Vec<Vec<f64>>,
    pub checkpoint: Option<String>,
    pub config: serde_json::Value,
    pub complete: bool,
    pub error: Option<String>,
}

#[derive(Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Line<'a> {
    Eval(&'a EvalRecord),
    Run {
        iterations: u64,
        replay_steps: u64,
        throughput: &'a [ThroughputRecord],
        task_classes: &'a [Vec<usize>],
        task_online_error: &'a [f64],
        task_end_s: &'a [Vec<f64>],
        checkpoint: &'a Option<String>,
        config: &'a serde_json::Value,
        complete: bool,
        error: &'a Option<String>,
    },
}

impl RunLog {
    /// One JSON object per evaluation record, then one `"type": "run"` trailer.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(&Line::Eval(r))?);
            out.push('\n');
        }
        let trailer = Line::Run {
            iterations: self.iterations,
            replay_steps: self.replay_steps,
            throughput: &self.throughput,
            task_classes: &self.task_classes,
            task_online_error: &self.task_online_error,
            task_end_s: &self.task_end_s,
            checkpoint: &self.checkpoint,
            config: &self.config,
            complete: self.complete,
            error: &self.error,
        };
        out.push_str(&serde_json::to_string(&trailer)?);
        out.push('\n');
        Ok(out)
    }

    /// `iteration,samples_seen,accuracy_softmax,accuracy_ncm,mean_s,v_m` rows.
    pub fn eval_csv(&self) -> String {
        let mut out = String::from("iteration,samples_seen,accuracy_softmax,accuracy_ncm,mean_s,v_m\n");
        for r in &self.records {
            let v_m = r.v_m_measured.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.iteration,
                r.samples_seen,
                r.accuracy_softmax,
                r.accuracy_ncm,
                r.mean_s(&[]),
                v_m
            );
        }
        out
    }
}
