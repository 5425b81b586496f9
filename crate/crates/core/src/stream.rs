//! Task-structured stream generation and flow-rate simulation.
//!
//! A stream is built once from a [`StreamConfig`] and a pool of samples. The
//! `k`-th emitted sample arrives at `k / v_s` seconds. A [`FlowSimulator`]
//! then replays the stream against a model that trains `v_m` samples per
//! second: whenever the backlog of arrived-but-unprocessed samples exceeds one
//! batch, the oldest ones are dropped for good.
//!
//! Boundaries between consecutive tasks are blurry. The window around a
//! boundary covers the last 5% of the earlier task and the first 5% of the
//! later one; inside it each emitted sample comes from the adjacent task with
//! probability `overlap_fraction`.

use std::collections::BTreeSet;
use std::time::Duration;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Sample;
use crate::error::{Error, Result};
use crate::metrics::measure_throughput;

/// Fraction of each task's sample count that lies inside a boundary window.
pub const BOUNDARY_WINDOW_FRACTION: f64 = 0.05;

/// Default cross-task mixing probability inside boundary windows.
pub const DEFAULT_OVERLAP_FRACTION: f64 = 0.10;

/// Tolerance used when converting times to arrival counts.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub classes: Vec<usize>,
    /// Number of samples the task emits.
    pub samples: usize,
    /// Duration of the task in seconds.
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSchedule {
    pub tasks: Vec<TaskSpec>,
    #[serde(default = "default_overlap")]
    pub overlap_fraction: f64,
}

fn default_overlap() -> f64 {
    DEFAULT_OVERLAP_FRACTION
}

impl TaskSchedule {
    /// Splits classes `0..num_classes` into consecutive groups of
    /// `classes_per_task`, each lasting `duration` seconds at `flow_rate`.
    pub fn split_classes(
        num_classes: usize,
        classes_per_task: usize,
        flow_rate: f64,
        duration: f64,
    ) -> Result<Self> {
        if classes_per_task == 0 || num_classes == 0 {
            return Err(Error::config("class counts must be positive"));
        }
        let samples = (flow_rate * duration).round() as usize;
        let tasks = (0..num_classes)
            .collect::<Vec<_>>()
            .chunks(classes_per_task)
            .map(|chunk| TaskSpec {
                classes: chunk.to_vec(),
                samples,
                duration,
            })
            .collect();
        Ok(TaskSchedule {
            tasks,
            overlap_fraction: DEFAULT_OVERLAP_FRACTION,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.tasks
            .iter()
            .flat_map(|t| t.classes.iter())
            .max()
            .map_or(0, |&c| c + 1)
    }

    pub fn total_samples(&self) -> usize {
        self.tasks.iter().map(|t| t.samples).sum()
    }

    /// Checks the schedule against a class count `classes`.
    pub fn validate(&self, classes: usize) -> Result<()> {
        if self.tasks.is_empty() {
            return Err(Error::config("schedule has no tasks"));
        }
        if !(0.0..0.5).contains(&self.overlap_fraction) {
            return Err(Error::config(format!(
                "overlap_fraction must lie in [0, 0.5), got {}",
                self.overlap_fraction
            )));
        }
        let mut union = BTreeSet::new();
        for (t, task) in self.tasks.iter().enumerate() {
            if task.classes.is_empty() {
                return Err(Error::config(format!("task {t} has an empty class set")));
            }
            if task.samples == 0 {
                return Err(Error::config(format!("task {t} emits no samples")));
            }
            if !(task.duration > 0.0 && task.duration.is_finite()) {
                return Err(Error::config(format!(
                    "task {t} has non-positive duration"
                )));
            }
            for &c in &task.classes {
                if c >= classes {
                    return Err(Error::config(format!(
                        "task {t} references class {c} but only {classes} classes exist"
                    )));
                }
                union.insert(c);
            }
        }
        if union.len() != classes {
            return Err(Error::config(format!(
                "schedule covers {} of {classes} classes",
                union.len()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamMode {
    /// All classes flattened into one task with uniform class probability.
    SingleTask,
    ClassIncremental,
    /// Every task sees every class; tasks draw from disjoint slices of each
    /// class's samples.
    DomainIncremental,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamConfig {
    pub schedule: TaskSchedule,
    /// Arrival rate `v_s` in samples per second.
    pub flow_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub mode: StreamMode,
}

impl StreamConfig {
    /// The schedule actually streamed, after applying the mode.
    pub fn effective_schedule(&self) -> TaskSchedule {
        match self.mode {
            StreamMode::SingleTask => {
                let classes: BTreeSet<usize> = self
                    .schedule
                    .tasks
                    .iter()
                    .flat_map(|t| t.classes.iter().copied())
                    .collect();
                TaskSchedule {
                    tasks: vec![TaskSpec {
                        classes: classes.into_iter().collect(),
                        samples: self.schedule.total_samples(),
                        duration: self.schedule.tasks.iter().map(|t| t.duration).sum(),
                    }],
                    overlap_fraction: 0.0,
                }
            }
            StreamMode::ClassIncremental => self.schedule.clone(),
            StreamMode::DomainIncremental => {
                let all: Vec<usize> = (0..self.schedule.num_classes()).collect();
                TaskSchedule {
                    tasks: self
                        .schedule
                        .tasks
                        .iter()
                        .map(|t| TaskSpec {
                            classes: all.clone(),
                            samples: t.samples,
                            duration: t.duration,
                        })
                        .collect(),
                    overlap_fraction: self.schedule.overlap_fraction,
                }
            }
        }
    }

    pub fn validate(&self, classes: usize) -> Result<()> {
        if !(self.flow_rate > 0.0 && self.flow_rate.is_finite()) {
            return Err(Error::config("flow_rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        self.schedule.validate(classes)?;
        for (t, task) in self.schedule.tasks.iter().enumerate() {
            let implied = self.flow_rate * task.duration;
            if (implied - task.samples as f64).abs() > 1.0 {
                return Err(Error::config(format!(
                    "task {t}: {} samples cannot arrive in {} s at {} samples/s",
                    task.samples, task.duration, self.flow_rate
                )));
            }
        }
        Ok(())
    }
}

/// A sample positioned in the stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimedSample {
    pub sample: Sample,
    /// Scheduled task whose time slot the sample arrived in.
    pub segment: usize,
    /// Arrival time in seconds.
    pub arrival_time: f64,
}

/// Contiguous index range of the stream owned by one scheduled task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub task: usize,
    pub classes: Vec<usize>,
    pub start: usize,
    pub end: usize,
    pub duration: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stream {
    pub items: Vec<TimedSample>,
    pub segments: Vec<Segment>,
    pub flow_rate: f64,
    pub batch_size: usize,
}

impl Stream {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Index range of the boundary window between segment `t` and `t + 1`.
    pub fn boundary_window(&self, t: usize) -> Option<std::ops::Range<usize>> {
        let left = self.segments.get(t)?;
        let right = self.segments.get(t + 1)?;
        let tail = window_len(left.end - left.start);
        let head = window_len(right.end - right.start);
        Some(left.end - tail..right.start + head)
    }

    pub fn cursor(&self) -> StreamCursor<'_> {
        StreamCursor::new(self)
    }
}

fn window_len(samples: usize) -> usize {
    (samples as f64 * BOUNDARY_WINDOW_FRACTION).floor() as usize
}

/// Cycles through a shuffled index list, reshuffling on exhaustion.
struct ClassPool {
    rows: Vec<usize>,
    pos: usize,
}

impl ClassPool {
    fn draw(&mut self, rng: &mut ChaCha8Rng) -> usize {
        if self.pos == self.rows.len() {
            self.rows.shuffle(rng);
            self.pos = 0;
        }
        let row = self.rows[self.pos];
        self.pos += 1;
        row
    }
}

/// Builds the timed stream described by `cfg` from `samples`.
///
/// The ordering is a pure function of `cfg.seed`, the config and the sample
/// list.
pub fn build_stream(cfg: &StreamConfig, samples: &[Sample]) -> Result<Stream> {
    let schedule = cfg.effective_schedule();
    if !(cfg.flow_rate > 0.0) {
        return Err(Error::config("flow_rate must be positive"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::config("batch_size must be at least 1"));
    }
    let num_classes = schedule
        .num_classes()
        .max(samples.iter().map(|s| s.label + 1).max().unwrap_or(0));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, s) in samples.iter().enumerate() {
        by_class[s.label].push(i);
    }
    for task in &schedule.tasks {
        for &c in &task.classes {
            if by_class[c].is_empty() {
                return Err(Error::AbsentClass(c));
            }
        }
    }

    // Pools are keyed by (task, class) in domain-incremental mode so tasks
    // draw from disjoint slices; otherwise every task shares the class pool.
    let n_tasks = schedule.tasks.len();
    let per_task_pools = cfg.mode == StreamMode::DomainIncremental;
    let mut pools: Vec<Vec<ClassPool>> = Vec::new();
    if per_task_pools {
        for t in 0..n_tasks {
            let mut row = Vec::with_capacity(num_classes);
            for rows in &by_class {
                let chunk = rows.len().div_ceil(n_tasks).max(1);
                let start = (t * chunk).min(rows.len());
                let end = ((t + 1) * chunk).min(rows.len());
                let mut slice = if start < end {
                    rows[start..end].to_vec()
                } else {
                    rows.clone()
                };
                slice.shuffle(&mut rng);
                row.push(ClassPool {
                    rows: slice,
                    pos: 0,
                });
            }
            pools.push(row);
        }
    } else {
        let mut row = Vec::with_capacity(num_classes);
        for rows in &by_class {
            let mut shuffled = rows.clone();
            shuffled.shuffle(&mut rng);
            row.push(ClassPool {
                rows: shuffled,
                pos: 0,
            });
        }
        pools.push(row);
    }

    let total = schedule.total_samples();
    let mut items = Vec::with_capacity(total);
    let mut segments = Vec::with_capacity(n_tasks);
    let overlap = schedule.overlap_fraction;
    for (t, task) in schedule.tasks.iter().enumerate() {
        let start = items.len();
        let head = if t > 0 { window_len(task.samples) } else { 0 };
        let tail = if t + 1 < n_tasks {
            window_len(task.samples)
        } else {
            0
        };
        for j in 0..task.samples {
            let mut source = t;
            if overlap > 0.0 {
                if j < head {
                    if rng.random::<f64>() < overlap {
                        source = t - 1;
                    }
                } else if j >= task.samples - tail && rng.random::<f64>() < overlap {
                    source = t + 1;
                }
            }
            let classes = &schedule.tasks[source].classes;
            let class = classes[rng.random_range(0..classes.len())];
            let pool = &mut pools[if per_task_pools { source } else { 0 }][class];
            let row = pool.draw(&mut rng);
            let k = items.len();
            items.push(TimedSample {
                sample: Sample {
                    features: samples[row].features.clone(),
                    label: class,
                    task_id: source,
                    arrival_index: k as u64,
                },
                segment: t,
                arrival_time: k as f64 / cfg.flow_rate,
            });
        }
        segments.push(Segment {
            task: t,
            classes: task.classes.clone(),
            start,
            end: items.len(),
            duration: task.duration,
        });
    }
    Ok(Stream {
        items,
        segments,
        flow_rate: cfg.flow_rate,
        batch_size: cfg.batch_size,
    })
}

/// Per-task accounting of arrivals against processing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputRecord {
    pub task_id: usize,
    pub arrived: usize,
    pub processed: usize,
    pub skipped: usize,
    /// `None` when no batch has a recorded duration (unlimited throughput).
    pub measured_v_m: Option<f64>,
}

/// Result of draining the stream at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Drain {
    pub batch: Vec<TimedSample>,
    pub skipped: usize,
}

/// Read position in a [`Stream`] with per-segment processed/skipped counts.
#[derive(Debug, Clone)]
pub struct StreamCursor<'a> {
    stream: &'a Stream,
    next: usize,
    processed: Vec<usize>,
    skipped: Vec<usize>,
}

impl<'a> StreamCursor<'a> {
    pub fn new(stream: &'a Stream) -> Self {
        let n = stream.segments.len();
        StreamCursor {
            stream,
            next: 0,
            processed: vec![0; n],
            skipped: vec![0; n],
        }
    }

    pub fn is_exhausted(&self) -> bool {
        self.next >= self.stream.len()
    }

    /// Number of samples that have arrived by `wall_clock`.
    pub fn arrived_by(&self, wall_clock: f64) -> usize {
        if wall_clock < 0.0 {
            return 0;
        }
        let count = (wall_clock * self.stream.flow_rate + TIME_EPS).floor() as usize + 1;
        count.min(self.stream.len())
    }

    /// Earliest time at which a full batch (or the final remainder) is available.
    pub fn ready_time(&self) -> Option<f64> {
        if self.is_exhausted() {
            return None;
        }
        let last = (self.next + self.stream.batch_size - 1).min(self.stream.len() - 1);
        Some(self.stream.items[last].arrival_time)
    }

    /// Takes up to one batch of samples that arrived by `wall_clock`.
    ///
    /// If more than one batch is waiting, the oldest excess samples are
    /// skipped first. At end of stream the batch is empty.
    pub fn drain_batch(&mut self, wall_clock: f64) -> Drain {
        let arrived = self.arrived_by(wall_clock);
        let backlog = arrived.saturating_sub(self.next);
        let batch_size = self.stream.batch_size;
        let mut skipped = 0;
        if backlog > batch_size {
            skipped = backlog - batch_size;
            for item in &self.stream.items[self.next..self.next + skipped] {
                self.skipped[item.segment] += 1;
            }
            self.next += skipped;
        }
        let take = arrived.saturating_sub(self.next).min(batch_size);
        let batch = self.stream.items[self.next..self.next + take].to_vec();
        for item in &batch {
            self.processed[item.segment] += 1;
        }
        self.next += take;
        Drain { batch, skipped }
    }

    pub fn processed(&self) -> &[usize] {
        &self.processed
    }

    pub fn skipped(&self) -> &[usize] {
        &self.skipped
    }
}

/// How long the model takes per batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum ModelThroughput {
    /// Training is instantaneous; nothing is ever skipped.
    Unlimited,
    /// A fixed `v_m` in samples per second.
    Fixed(f64),
    /// `v_m` follows the measured wall-clock time of each batch.
    Measured,
}

/// Drives a [`StreamCursor`] against a simulated clock.
#[derive(Debug, Clone)]
pub struct FlowSimulator<'a> {
    cursor: StreamCursor<'a>,
    throughput: ModelThroughput,
    clock: f64,
    batch_times: Vec<Vec<f64>>,
}

impl<'a> FlowSimulator<'a> {
    pub fn new(stream: &'a Stream, throughput: ModelThroughput) -> Result<Self> {
        if let ModelThroughput::Fixed(v) = throughput {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config("model throughput must be positive"));
            }
        }
        Ok(FlowSimulator {
            cursor: stream.cursor(),
            throughput,
            clock: 0.0,
            batch_times: vec![Vec::new(); stream.segments.len()],
        })
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    /// Waits for the next batch and drains it. Returns `None` at end of stream.
    pub fn next_batch(&mut self) -> Option<Drain> {
        let ready = self.cursor.ready_time()?;
        self.clock = self.clock.max(ready);
        Some(self.cursor.drain_batch(self.clock))
    }

    /// Advances the clock past the processing of `batch`.
    ///
    /// `elapsed` is the measured training time, used only in
    /// [`ModelThroughput::Measured`] mode.
    pub fn complete_batch(&mut self, batch: &[TimedSample], elapsed: Duration) {
        let Some(first) = batch.first() else { return };
        let seconds = match self.throughput {
            ModelThroughput::Unlimited => 0.0,
            ModelThroughput::Fixed(v_m) => batch.len() as f64 / v_m,
            ModelThroughput::Measured => elapsed.as_secs_f64(),
        };
        self.clock += seconds;
        if seconds > 0.0 {
            self.batch_times[first.segment].push(seconds);
        }
    }

    /// Per-task throughput accounting so far.
    pub fn records(&self) -> Vec<ThroughputRecord> {
        let stream = self.cursor.stream;
        stream
            .segments
            .iter()
            .enumerate()
            .map(|(t, seg)| {
                let measured_v_m = match self.throughput {
                    ModelThroughput::Fixed(v) => Some(v),
                    _ if self.batch_times[t].is_empty() => None,
                    _ => Some(measure_throughput(&self.batch_times[t], stream.batch_size)),
                };
                ThroughputRecord {
                    task_id: t,
                    arrived: seg.end - seg.start,
                    processed: self.cursor.processed[t],
                    skipped: self.cursor.skipped[t],
                    measured_v_m,
                }
            })
            .collect()
    }

    pub fn cursor(&self) -> &StreamCursor<'a> {
        &self.cursor
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool(classes: usize, per_class: usize) -> Vec<Sample> {
        (0..classes * per_class)
            .map(|i| Sample {
                features: vec![i as f64],
                label: i % classes,
                task_id: 0,
                arrival_index: i as u64,
            })
            .collect()
    }

    fn config(tasks: Vec<Vec<usize>>, per_task: usize, rate: f64, overlap: f64) -> StreamConfig {
        StreamConfig {
            schedule: TaskSchedule {
                tasks: tasks
                    .into_iter()
                    .map(|classes| TaskSpec {
                        classes,
                        samples: per_task,
                        duration: per_task as f64 / rate,
                    })
                    .collect(),
                overlap_fraction: overlap,
            },
            flow_rate: rate,
            batch_size: 10,
            seed: 0,
            mode: StreamMode::ClassIncremental,
        }
    }

    fn run_sim(stream: &Stream, v_m: f64) -> Vec<ThroughputRecord> {
        let mut sim = FlowSimulator::new(stream, ModelThroughput::Fixed(v_m)).unwrap();
        while let Some(drain) = sim.next_batch() {
            sim.complete_batch(&drain.batch, Duration::ZERO);
        }
        sim.records()
    }

    #[test]
    fn zero_overlap_is_strict_concatenation() {
        let cfg = config(vec![vec![0, 1], vec![2, 3], vec![4]], 200, 100.0, 0.0);
        let stream = build_stream(&cfg, &pool(5, 30)).unwrap();
        for item in &stream.items {
            assert!(stream.segments[item.segment].classes.contains(&item.sample.label));
            assert_eq!(item.sample.task_id, item.segment);
        }
        let segs: Vec<usize> = stream.items.iter().map(|i| i.segment).collect();
        assert!(segs.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn arrival_times_follow_flow_rate() {
        let cfg = config(vec![vec![0], vec![1]], 50, 25.0, 0.1);
        let stream = build_stream(&cfg, &pool(2, 5)).unwrap();
        for (k, item) in stream.items.iter().enumerate() {
            assert_eq!(item.arrival_time, k as f64 / 25.0);
            assert_eq!(item.sample.arrival_index, k as u64);
        }
    }

    #[test]
    fn single_task_mode_balances_classes() {
        let mut cfg = config(vec![vec![0], vec![1]], 1000, 100.0, 0.1);
        cfg.mode = StreamMode::SingleTask;
        let stream = build_stream(&cfg, &pool(2, 50)).unwrap();
        assert_eq!(stream.segments.len(), 1);
        let zeros = stream.items[..1000]
            .iter()
            .filter(|i| i.sample.label == 0)
            .count();
        let freq = zeros as f64 / 1000.0;
        assert!((freq - 0.5).abs() <= 0.05, "class-0 frequency {freq}");
    }

    #[test]
    fn blurry_window_mixes_about_overlap_fraction() {
        let cfg = config(vec![vec![0, 1], vec![2, 3]], 1000, 100.0, 0.10);
        let stream = build_stream(&cfg, &pool(4, 100)).unwrap();
        let window = stream.boundary_window(0).unwrap();
        assert_eq!(window.len(), 100);
        let cross = stream.items[window.clone()]
            .iter()
            .filter(|i| i.sample.task_id != i.segment)
            .count();
        assert!((5..=15).contains(&cross), "cross-task count {cross}");
        let outside = stream
            .items
            .iter()
            .enumerate()
            .filter(|(k, i)| !window.contains(k) && i.sample.task_id != i.segment)
            .count();
        assert_eq!(outside, 0);
    }

    #[test]
    fn absent_class_is_rejected() {
        let cfg = config(vec![vec![0, 1], vec![2]], 10, 10.0, 0.0);
        assert!(matches!(
            build_stream(&cfg, &pool(2, 5)),
            Err(Error::AbsentClass(2))
        ));
    }

    #[test]
    fn stream_is_deterministic_in_seed() {
        let cfg = config(vec![vec![0, 1], vec![2, 3]], 300, 100.0, 0.1);
        let data = pool(4, 40);
        let a = build_stream(&cfg, &data).unwrap();
        let b = build_stream(&cfg, &data).unwrap();
        assert_eq!(a, b);
        let mut other = cfg.clone();
        other.seed = 1;
        assert_ne!(a.items, build_stream(&other, &data).unwrap().items);
    }

    #[test]
    fn slower_model_skips_the_excess() {
        let cfg = config(vec![vec![0]], 1000, 100.0, 0.0);
        let stream = build_stream(&cfg, &pool(1, 10)).unwrap();
        let rec = &run_sim(&stream, 60.0)[0];
        assert_eq!(rec.arrived, rec.processed + rec.skipped);
        // 600 processed / 400 skipped, up to one batch of rounding.
        assert!(rec.processed.abs_diff(600) <= 10, "{rec:?}");
        assert!(rec.skipped.abs_diff(400) <= 10, "{rec:?}");
    }

    #[test]
    fn faster_model_never_skips() {
        let cfg = config(vec![vec![0], vec![1]], 500, 50.0, 0.1);
        let stream = build_stream(&cfg, &pool(2, 10)).unwrap();
        for rec in run_sim(&stream, 80.0) {
            assert_eq!(rec.skipped, 0);
            assert_eq!(rec.processed, rec.arrived);
        }
    }

    #[test]
    fn matched_rates_divide_exactly() {
        let cfg = config(vec![vec![0]], 100, 50.0, 0.0);
        let stream = build_stream(&cfg, &pool(1, 10)).unwrap();
        let mut sim = FlowSimulator::new(&stream, ModelThroughput::Fixed(50.0)).unwrap();
        let mut batches = 0;
        while let Some(drain) = sim.next_batch() {
            assert_eq!(drain.skipped, 0);
            assert_eq!(drain.batch.len(), 10);
            sim.complete_batch(&drain.batch, Duration::ZERO);
            batches += 1;
        }
        assert_eq!(batches, 10);
        assert_eq!(sim.records()[0].skipped, 0);
    }

    #[test]
    fn end_of_stream_returns_empty_batch() {
        let cfg = config(vec![vec![0]], 5, 10.0, 0.0);
        let stream = build_stream(&cfg, &pool(1, 5)).unwrap();
        let mut cursor = stream.cursor();
        let first = cursor.drain_batch(100.0);
        assert_eq!(first.batch.len(), 5);
        let second = cursor.drain_batch(200.0);
        assert!(second.batch.is_empty());
        assert_eq!(second.skipped, 0);
    }

    #[test]
    fn inconsistent_duration_is_rejected() {
        let mut cfg = config(vec![vec![0]], 100, 10.0, 0.0);
        cfg.schedule.tasks[0].duration = 1.0;
        assert!(cfg.validate(1).is_err());
        cfg.schedule.tasks[0].duration = 10.0;
        assert!(cfg.validate(1).is_ok());
    }
}
