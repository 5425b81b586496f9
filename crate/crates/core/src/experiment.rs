//! Seed and parameter sweeps over [`trainer::run`](crate::trainer::run),
//! with the files they leave behind.
//!
//! Layout under the output directory:
//!
//! ```text
//! <out>/summary.csv
//! <out>/pacbayes.json
//! <out>/<sweep-point>/<seed>/run.jsonl
//! <out>/<sweep-point>/<seed>/eval.csv
//! <out>/<sweep-point>/<seed>/head.json, head.params.f64
//! <out>/<sweep-point>/<seed>/buffer/
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::classifier::save_checkpoint;
use crate::dataset::{load_dataset, Dataset};
use crate::error::{Error, Result};
use crate::metrics::{a_auc, a_auc_raw, last_accuracy, RunLog};
use crate::pacbayes::{report_from_run, PacBayesConfig, PacBayesReport};
use crate::stream::{ModelThroughput, StreamConfig, StreamMode, TaskSchedule, TaskSpec, DEFAULT_OVERLAP_FRACTION};
use crate::synthetic::{generate_synthetic, SyntheticSpec};
use crate::trainer::{run, RunConfig, TrainerConfig};

/// Where the samples come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataSpec {
    /// Manifest (`.json`) or `.csv` file; takes precedence over `synthetic`.
    pub path: Option<PathBuf>,
    pub synthetic: Option<SyntheticSpec>,
    /// Fraction of every class held out for evaluation.
    pub eval_fraction: f64,
    /// Offset the synthetic seed by the run seed, so every seed sees its
    /// own draw of the class geometry.
    pub reseed: bool,
}

impl Default for DataSpec {
    fn default() -> Self {
        DataSpec {
            path: None,
            synthetic: Some(SyntheticSpec::default()),
            eval_fraction: 0.2,
            reseed: false,
        }
    }
}

impl DataSpec {
    pub fn load(&self, seed: u64) -> Result<Dataset> {
        match (&self.path, &self.synthetic) {
            (Some(path), _) => load_dataset(path),
            (None, Some(spec)) => {
                let mut spec = spec.clone();
                if self.reseed {
                    spec.seed = spec.seed.wrapping_add(seed);
                }
                generate_synthetic(&spec)
            }
            (None, None) => Err(Error::config("no dataset path or synthetic spec given")),
        }
    }
}

/// Stream shape; the full schedule is derived from the data unless given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StreamSpec {
    pub flow_rate: f64,
    pub batch_size: usize,
    pub mode: StreamMode,
    pub classes_per_task: usize,
    /// Seconds per task; by default every task lasts long enough to stream
    /// each of its training samples once.
    pub task_duration: Option<f64>,
    pub overlap_fraction: f64,
    pub schedule: Option<TaskSchedule>,
}

impl Default for StreamSpec {
    fn default() -> Self {
        StreamSpec {
            flow_rate: 100.0,
            batch_size: 10,
            mode: StreamMode::ClassIncremental,
            classes_per_task: 2,
            task_duration: None,
            overlap_fraction: DEFAULT_OVERLAP_FRACTION,
            schedule: None,
        }
    }
}

impl StreamSpec {
    pub fn to_config(&self, train: &Dataset, seed: u64) -> Result<StreamConfig> {
        let schedule = match &self.schedule {
            Some(s) => s.clone(),
            None => {
                let mut schedule = TaskSchedule::split_classes(
                    train.classes,
                    self.classes_per_task,
                    self.flow_rate,
                    self.task_duration.unwrap_or(1.0),
                )?;
                schedule.overlap_fraction = self.overlap_fraction;
                if self.task_duration.is_none() {
                    let counts = train.class_counts();
                    let per_task = train.len() / schedule.tasks.len().max(1);
                    for task in &mut schedule.tasks {
                        let samples = match self.mode {
                            StreamMode::DomainIncremental => per_task,
                            _ => task.classes.iter().map(|&c| counts[c]).sum(),
                        };
                        *task = TaskSpec {
                            classes: std::mem::take(&mut task.classes),
                            samples,
                            duration: samples as f64 / self.flow_rate,
                        };
                    }
                }
                schedule
            }
        };
        Ok(StreamConfig {
            schedule,
            flow_rate: self.flow_rate,
            batch_size: self.batch_size,
            seed,
            mode: self.mode,
        })
    }
}

/// A complete experiment: data, stream, trainer, seeds and sweep axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub data: DataSpec,
    pub stream: StreamSpec,
    pub trainer: TrainerConfig,
    pub throughput: ModelThroughput,
    pub pacbayes: PacBayesConfig,
    pub seeds: Vec<u64>,
    /// Dotted config path (for example `trainer.gamma`) to the values it
    /// takes; runs cover the cartesian product.
    pub sweep: BTreeMap<String, Vec<Value>>,
    pub save_checkpoints: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            data: DataSpec::default(),
            stream: StreamSpec::default(),
            trainer: TrainerConfig::default(),
            throughput: ModelThroughput::Unlimited,
            pacbayes: PacBayesConfig::default(),
            seeds: vec![0],
            sweep: BTreeMap::new(),
            save_checkpoints: true,
        }
    }
}

impl ExperimentSpec {
    /// Reads a TOML or JSON spec, chosen by file extension.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| Error::Manifest {
                path: path.into(),
                message: e.to_string(),
            })
        } else {
            Ok(serde_json::from_str(&text)?)
        }
    }

    /// Sets one dotted-path field from a JSON value.
    pub fn set(&mut self, path: &str, value: Value) -> Result<()> {
        let mut tree = serde_json::to_value(&*self)?;
        set_path(&mut tree, path, value)?;
        *self = serde_json::from_value(tree)
            .map_err(|e| Error::config(format!("{path}: {e}")))?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("seed list is empty"));
        }
        let tree = serde_json::to_value(self)?;
        for (axis, values) in &self.sweep {
            lookup(&tree, axis)?;
            if values.is_empty() {
                return Err(Error::config(format!("sweep axis {axis} has no values")));
            }
        }
        self.trainer.validate()
    }

    /// Every sweep point as `(name, spec)`, in lexicographic axis order.
    pub fn sweep_points(&self) -> Result<Vec<(String, ExperimentSpec)>> {
        let mut points = vec![(String::new(), self.clone())];
        for (axis, values) in &self.sweep {
            let mut next = Vec::new();
            for (name, spec) in &points {
                for value in values {
                    let mut spec = spec.clone();
                    spec.set(axis, value.clone())?;
                    let label = format!("{axis}={}", value_label(value));
                    let name = if name.is_empty() {
                        label
                    } else {
                        format!("{name},{label}")
                    };
                    next.push((name, spec));
                }
            }
            points = next;
        }
        if self.sweep.is_empty() {
            points[0].0 = "default".into();
        }
        Ok(points)
    }
}

fn value_label(value: &Value) -> String {
    let text = match value {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    };
    text.replace(['/', '\\', ' '], "_")
}

fn lookup<'a>(tree: &'a Value, path: &str) -> Result<&'a Value> {
    let mut node = tree;
    for key in path.split('.') {
        node = node
            .get(key)
            .ok_or_else(|| Error::config(format!("unknown config field {path}")))?;
    }
    Ok(node)
}

fn set_path(tree: &mut Value, path: &str, value: Value) -> Result<()> {
    let mut node = tree;
    for key in path.split('.') {
        node = node
            .get_mut(key)
            .ok_or_else(|| Error::config(format!("unknown config field {path}")))?;
    }
    *node = value;
    Ok(())
}

/// Outcome of one `(sweep point, seed)` run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub point: String,
    pub seed: u64,
    pub log: RunLog,
    pub pacbayes: Option<PacBayesReport>,
}

impl RunResult {
    pub fn a_auc(&self) -> Option<f64> {
        a_auc(&self.log.records).ok()
    }

    pub fn last_accuracy(&self) -> Option<f64> {
        last_accuracy(&self.log.records).ok()
    }

    /// Mean final `s(w)` over every column.
    pub fn final_mean_s(&self) -> Option<f64> {
        self.log.records.last().map(|r| r.mean_s(&[]))
    }
}

/// Runs of one experiment, ordered by sweep point then seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub runs: Vec<RunResult>,
}

impl ExperimentOutcome {
    pub fn all_complete(&self) -> bool {
        self.runs.iter().all(|r| r.log.complete)
    }

    /// One row per sweep point with mean and sample standard deviation over
    /// seeds.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from(
            "point,runs,complete,a_auc_mean,a_auc_std,a_auc_raw_mean,a_auc_raw_std,last_accuracy_mean,last_accuracy_std,\
             mean_s_mean,mean_s_std,processed_fraction_mean,processed_fraction_std,\
             v_m_mean,v_m_std,bound_total_mean,bound_total_std\n",
        );
        let mut points: Vec<&str> = Vec::new();
        for r in &self.runs {
            if !points.contains(&r.point.as_str()) {
                points.push(&r.point);
            }
        }
        for point in points {
            let runs: Vec<&RunResult> = self.runs.iter().filter(|r| r.point == point).collect();
            let col = |f: &dyn Fn(&RunResult) -> Option<f64>| {
                let values: Vec<f64> = runs.iter().filter_map(|r| f(r)).collect();
                let (mean, std) = mean_std(&values);
                format!("{},{}", fmt_opt(mean), fmt_opt(std))
            };
            let complete = runs.iter().filter(|r| r.log.complete).count();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                csv_field(point),
                runs.len(),
                complete,
                col(&|r| r.a_auc()),
                col(&|r| a_auc_raw(&r.log.records).ok()),
                col(&|r| r.last_accuracy()),
                col(&|r| r.final_mean_s()),
                col(&|r| processed_fraction(&r.log)),
                col(&|r| mean_v_m(&r.log)),
                col(&|r| r.pacbayes.as_ref().map(|p| p.terms.total)),
            );
        }
        out
    }
}

fn processed_fraction(log: &RunLog) -> Option<f64> {
    let arrived: usize = log.throughput.iter().map(|t| t.arrived).sum();
    let processed: usize = log.throughput.iter().map(|t| t.processed).sum();
    (arrived > 0).then(|| processed as f64 / arrived as f64)
}

fn mean_v_m(log: &RunLog) -> Option<f64> {
    let values: Vec<f64> = log.throughput.iter().filter_map(|t| t.measured_v_m).collect();
    mean_std(&values).0
}

/// Mean and sample standard deviation; the deviation needs two values.
pub fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (Some(mean), None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some(var.sqrt()))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn run_one(point: &str, spec: &ExperimentSpec, seed: u64, out: Option<&Path>) -> Result<RunResult> {
    let data = spec.data.load(seed)?;
    let (train, eval) = data.split_eval(spec.data.eval_fraction, seed)?;
    let mut trainer = spec.trainer.clone();
    trainer.seed = seed;
    let cfg = RunConfig {
        stream: spec.stream.to_config(&train, seed)?,
        trainer,
        throughput: spec.throughput,
    };
    let (mut log, state) = run(&train.samples, &eval.samples, data.classes, &cfg)?;
    let pacbayes = match report_from_run(&log, &spec.pacbayes) {
        Ok(r) => Some(r),
        Err(e) => {
            log::warn!("no bound report for {point}/{seed}: {e}");
            None
        }
    };
    if let Some(out) = out {
        let dir = out.join(point).join(seed.to_string());
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        if spec.save_checkpoints {
            save_checkpoint(&state.net, seed, &dir, "head")?;
            state.buffer.save(dir.join("buffer"), data.classes)?;
            log.checkpoint = Some("head.json".into());
        }
        write(&dir.join("run.jsonl"), &log.to_jsonl()?)?;
        write(&dir.join("eval.csv"), &log.eval_csv())?;
    }
    Ok(RunResult {
        point: point.to_string(),
        seed,
        log,
        pacbayes,
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Runs every `(sweep point, seed)` pair, in parallel, and writes the
/// artifacts when `out` is given.
pub fn run_experiment(spec: &ExperimentSpec, out: Option<&Path>) -> Result<ExperimentOutcome> {
    spec.validate()?;
    let points = spec.sweep_points()?;
    let jobs: Vec<(&str, &ExperimentSpec, u64)> = points
        .iter()
        .flat_map(|(name, s)| spec.seeds.iter().map(move |&seed| (name.as_str(), s, seed)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|(name, s, seed)| run_one(name, s, *seed, out))
        .collect::<Result<Vec<_>>>()?;
    let outcome = ExperimentOutcome { runs };
    if let Some(out) = out {
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        write(&out.join("summary.csv"), &outcome.summary_csv())?;
        let reports: Vec<Value> = outcome
            .runs
            .iter()
            .map(|r| {
                serde_json::json!({
                    "point": r.point,
                    "seed": r.seed,
                    "report": r.pacbayes,
                })
            })
            .collect();
        write(&out.join("pacbayes.json"), &serde_json::to_string_pretty(&reports)?)?;
    }
    Ok(outcome)
}
