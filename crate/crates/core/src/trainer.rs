//! The streaming training loop.
//!
//! Per incoming batch: offer it to the buffer, apply the freeze gate, run
//! the forward pass, update the NCM prototypes, take one AdamW step on
//! `CE + γ (L_p + L_s)`, replay from the buffer when the access policy
//! allows it, and finally fold the NCM batch accuracy into the running task
//! accuracy that drives the gate.

use std::time::{Duration, Instant};

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::buffer::{AccessPolicy, MemoryBuffer};
use crate::classifier::{argmax_masked, NcmState, Network, DEFAULT_NCM_MOMENTUM};
use crate::dataset::Sample;
use crate::error::{Error, Result};
use crate::losses::{
    cross_entropy, max_separation, sparsity_regularizer, targeted_binary_loss, LossBreakdown,
    PairSoftmax,
};
use crate::metrics::{confusion_matrix, evaluate, sparsity_stats, RunLog};
use crate::optim::{AdamW, AdamWConfig};
use crate::stream::{build_stream, FlowSimulator, ModelThroughput, StreamConfig};

/// What a replay step trains on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplayStrategy {
    /// Binary losses on class pairs the buffer shows to be confused.
    #[default]
    Targeted,
    /// Cross-entropy on a uniformly drawn replay batch.
    Uniform,
}

/// Whether a fired freeze gate stays fired until the next task.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateMode {
    #[default]
    Latch,
    /// Re-evaluated every batch.
    Toggle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig {
    pub gamma: f64,
    pub tau: f64,
    pub optimizer: AdamWConfig,
    pub lite_mode: bool,
    pub lite_threshold: f64,
    pub gate_mode: GateMode,
    /// Decay of the running task accuracy fed to the gate.
    pub accuracy_decay: f64,
    pub batch_size: usize,
    pub replay_batch_size: usize,
    /// Replay every this many iterations (`Freq = 1 / replay_every`).
    pub replay_every: u64,
    pub replay_strategy: ReplayStrategy,
    pub pair_softmax: PairSoftmax,
    pub buffer_size: usize,
    pub ncm_momentum: f64,
    /// Width of the ReLU adapter; `None` trains the head on raw features.
    pub hidden: Option<usize>,
    pub eval_interval: u64,
    pub seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            gamma: 0.01,
            tau: 0.2,
            optimizer: AdamWConfig::default(),
            lite_mode: false,
            lite_threshold: 0.9,
            gate_mode: GateMode::Latch,
            accuracy_decay: 0.9,
            batch_size: 10,
            replay_batch_size: 10,
            replay_every: 100,
            replay_strategy: ReplayStrategy::Targeted,
            pair_softmax: PairSoftmax::Renormalized,
            buffer_size: 100,
            ncm_momentum: DEFAULT_NCM_MOMENTUM,
            hidden: None,
            eval_interval: 100,
            seed: 0,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::config("gamma must be non-negative"));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::config("tau must lie in (0, 1)"));
        }
        if !(self.lite_threshold > 0.0 && self.lite_threshold < 1.0) {
            return Err(Error::config("lite_threshold must lie in (0, 1)"));
        }
        if !(0.0..1.0).contains(&self.accuracy_decay) {
            return Err(Error::config("accuracy_decay must lie in [0, 1)"));
        }
        if self.batch_size == 0 || self.replay_batch_size == 0 || self.buffer_size == 0 {
            return Err(Error::config("batch sizes and buffer size must be positive"));
        }
        if self.replay_every == 0 || self.eval_interval == 0 {
            return Err(Error::config("replay_every and eval_interval must be positive"));
        }
        if self.hidden == Some(0) {
            return Err(Error::config("hidden width must be positive"));
        }
        self.optimizer.validate()
    }
}

/// Freeze gate for the feature pathway.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiteGate {
    pub enabled: bool,
    pub threshold: f64,
    pub mode: GateMode,
    fired: bool,
}

impl LiteGate {
    pub fn new(enabled: bool, threshold: f64, mode: GateMode) -> Self {
        LiteGate {
            enabled,
            threshold,
            mode,
            fired: false,
        }
    }

    /// Feeds the current running task accuracy; returns whether the adapter
    /// should be frozen.
    pub fn check(&mut self, running_accuracy: f64) -> bool {
        if !self.enabled {
            return false;
        }
        let above = running_accuracy > self.threshold;
        self.fired = match self.mode {
            GateMode::Latch => self.fired || above,
            GateMode::Toggle => above,
        };
        self.fired
    }

    pub fn is_fired(&self) -> bool {
        self.fired
    }

    pub fn reset(&mut self) {
        self.fired = false;
    }
}

/// Exponentially weighted running accuracy, restarted per task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningAccuracy {
    pub decay: f64,
    value: Option<f64>,
}

impl RunningAccuracy {
    pub fn new(decay: f64) -> Self {
        RunningAccuracy { decay, value: None }
    }

    pub fn update(&mut self, batch_accuracy: f64) -> f64 {
        let v = match self.value {
            Some(v) => self.decay * v + (1.0 - self.decay) * batch_accuracy,
            None => batch_accuracy,
        };
        self.value = Some(v);
        v
    }

    pub fn value(&self) -> Option<f64> {
        self.value
    }

    pub fn reset(&mut self) {
        self.value = None;
    }
}

/// Gradients of every trainable tensor of a [`Network`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub adapter_weights: Array2<f64>,
    pub adapter_bias: Array1<f64>,
    pub head_weights: Array2<f64>,
    pub head_bias: Array1<f64>,
}

impl Gradients {
    /// Flattened in [`Network::parameter_vector`] order.
    pub fn to_vec(&self, with_adapter: bool) -> Vec<f64> {
        let mut out = Vec::new();
        if with_adapter {
            out.extend(self.adapter_weights.iter());
            out.extend(self.adapter_bias.iter());
        }
        out.extend(self.head_weights.iter());
        out.extend(self.head_bias.iter());
        out
    }

    fn add_assign(&mut self, other: &Gradients) {
        self.adapter_weights += &other.adapter_weights;
        self.adapter_bias += &other.adapter_bias;
        self.head_weights += &other.head_weights;
        self.head_bias += &other.head_bias;
    }
}

/// Back-propagates from the logits (and optionally the representations and
/// head weights) to every parameter.
fn backward(
    net: &Network,
    inputs: ArrayView2<f64>,
    pre_activation: Option<&Array2<f64>>,
    representations: &Array2<f64>,
    grad_logits: &Array2<f64>,
    grad_reps_extra: Option<&Array2<f64>>,
) -> Gradients {
    let head_weights = representations.t().dot(grad_logits);
    let head_bias = grad_logits.sum_axis(Axis(0));
    let (adapter_weights, adapter_bias) = match pre_activation {
        Some(z) => {
            let mut grad_reps = grad_logits.dot(&net.head.weights.t());
            if let Some(extra) = grad_reps_extra {
                grad_reps += extra;
            }
            let grad_z = grad_reps * &z.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
            (inputs.t().dot(&grad_z), grad_z.sum_axis(Axis(0)))
        }
        None => (
            Array2::zeros(net.adapter.weights.raw_dim()),
            Array1::zeros(net.adapter.bias.len()),
        ),
    };
    Gradients {
        adapter_weights,
        adapter_bias,
        head_weights,
        head_bias,
    }
}

/// `CE + γ (L_p + L_s)` on one batch and its gradient.
///
/// `active` lists the classes taking part in the separation loss; classes
/// absent from the batch are represented by `fallback`. With fewer than two
/// active classes `L_p` is 0.
pub fn training_objective<F>(
    net: &Network,
    inputs: ArrayView2<f64>,
    labels: &[usize],
    active: &[usize],
    fallback: F,
    gamma: f64,
) -> Result<(LossBreakdown, Gradients)>
where
    F: Fn(usize) -> Option<Array1<f64>>,
{
    let pass = net.forward_batch(inputs)?;
    let (ce, grad_logits) = cross_entropy(pass.logits.view(), labels);
    let (ls, grad_ls) = sparsity_regularizer(net.head.weights.view());
    let (lp, grad_lp) = if active.len() >= 2 && gamma > 0.0 {
        max_separation(pass.representations.view(), labels, active, fallback)?
    } else {
        (0.0, Array2::zeros(pass.representations.raw_dim()))
    };
    let grad_lp = grad_lp * gamma;
    let mut grads = backward(
        net,
        inputs,
        pass.pre_activation.as_ref(),
        &pass.representations,
        &grad_logits,
        Some(&grad_lp),
    );
    grads.head_weights.scaled_add(gamma, &grad_ls);
    Ok((LossBreakdown::new(ce, ls, lp, gamma), grads))
}

/// Summed targeted binary loss on a replay batch and its gradient.
pub fn replay_objective(
    net: &Network,
    inputs: ArrayView2<f64>,
    labels: &[usize],
    pairs: &[(usize, usize)],
    mode: PairSoftmax,
) -> Result<(f64, Gradients)> {
    let pass = net.forward_batch(inputs)?;
    let (lb, grad_logits) = targeted_binary_loss(pass.logits.view(), labels, pairs, mode);
    let grads = backward(
        net,
        inputs,
        pass.pre_activation.as_ref(),
        &pass.representations,
        &grad_logits,
        None,
    );
    Ok((lb, grads))
}

fn stack(samples: &[&Sample], dim: usize) -> Result<(Array2<f64>, Vec<usize>)> {
    let mut flat = Vec::with_capacity(samples.len() * dim);
    for s in samples {
        if s.features.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: s.features.len(),
                context: "training sample".into(),
            });
        }
        flat.extend_from_slice(&s.features);
    }
    let x = Array2::from_shape_vec((samples.len(), dim), flat).expect("contiguous batch");
    Ok((x, samples.iter().map(|s| s.label).collect()))
}

/// Result of one [`Trainer::train_step`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub loss: LossBreakdown,
    /// Softmax-head mistakes on the batch before the update.
    pub online_errors: usize,
    /// NCM accuracy on the batch after the prototype update.
    pub ncm_accuracy: f64,
    pub batch_time: Duration,
}

/// Result of one [`Trainer::replay_step`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayOutcome {
    pub pairs: Vec<(usize, usize)>,
    pub loss: f64,
    /// True when no pair was confused enough and plain replay ran instead.
    pub fallback: bool,
}

/// Model, prototypes, optimizer, buffer and gate of one run.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub config: TrainerConfig,
    pub net: Network,
    pub ncm: NcmState,
    pub optimizer: AdamW,
    pub buffer: MemoryBuffer,
    pub policy: AccessPolicy,
    pub gate: LiteGate,
    pub running_accuracy: RunningAccuracy,
    seen: Vec<bool>,
    iteration: u64,
}

impl Trainer {
    pub fn new(config: TrainerConfig, input_dim: usize, classes: usize) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let net = Network::init(input_dim, config.hidden, classes, &mut rng);
        Self::with_network(config, net)
    }

    /// Starts from an existing network, e.g. a loaded checkpoint.
    pub fn with_network(config: TrainerConfig, net: Network) -> Result<Self> {
        config.validate()?;
        let classes = net.classes();
        let sizes = [
            net.adapter.weights.len(),
            net.adapter.bias.len(),
            net.head.weights.len(),
            net.head.bias.len(),
        ];
        Ok(Trainer {
            ncm: NcmState::new(classes, config.ncm_momentum)?,
            optimizer: AdamW::new(config.optimizer, &sizes)?,
            buffer: MemoryBuffer::new(config.buffer_size, config.seed ^ 0x5eed_b0ff)?,
            policy: AccessPolicy::new(config.replay_every, config.replay_batch_size)?,
            gate: LiteGate::new(config.lite_mode, config.lite_threshold, config.gate_mode),
            running_accuracy: RunningAccuracy::new(config.accuracy_decay),
            seen: vec![false; classes],
            iteration: 0,
            net,
            config,
        })
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn seen(&self) -> &[bool] {
        &self.seen
    }

    /// Marks a class as seen, as if it had arrived in the stream.
    pub fn mark_seen(&mut self, class: usize) -> Result<()> {
        let classes = self.seen.len();
        let flag = self.seen.get_mut(class).ok_or(Error::LabelOutOfRange {
            row: 0,
            label: class,
            classes,
        })?;
        *flag = true;
        Ok(())
    }

    pub fn seen_classes(&self) -> Vec<usize> {
        (0..self.seen.len()).filter(|&c| self.seen[c]).collect()
    }

    fn apply(&mut self, grads: &Gradients) {
        let net = &mut self.net;
        if net.adapter.enabled && !net.adapter.frozen {
            self.optimizer.step(
                0,
                net.adapter.weights.as_slice_mut().expect("standard layout"),
                grads.adapter_weights.as_slice().expect("standard layout"),
            );
            self.optimizer.step(
                1,
                net.adapter.bias.as_slice_mut().expect("standard layout"),
                grads.adapter_bias.as_slice().expect("standard layout"),
            );
        }
        self.optimizer.step(
            2,
            net.head.weights.as_slice_mut().expect("standard layout"),
            grads.head_weights.as_slice().expect("standard layout"),
        );
        self.optimizer.step(
            3,
            net.head.bias.as_slice_mut().expect("standard layout"),
            grads.head_bias.as_slice().expect("standard layout"),
        );
    }

    /// Call when the stream enters a new task.
    pub fn start_task(&mut self) {
        self.gate.reset();
        self.running_accuracy.reset();
        self.net.adapter.frozen = false;
    }

    /// One streaming iteration: buffer update, gate, regularized update and the
    /// scheduled replay. Returns the replay outcome when replay ran.
    pub fn process_batch(&mut self, batch: &[Sample]) -> Result<(StepOutcome, Option<ReplayOutcome>)> {
        self.buffer.update(batch.iter());
        let step = self.train_step(batch)?;
        let replay = if self.policy.may_access(self.iteration) {
            Some(self.replay_step()?)
        } else {
            None
        };
        let acc = self.running_accuracy.update(step.ncm_accuracy);
        if self.gate.check(acc) {
            self.net.adapter.frozen = true;
        } else if self.config.gate_mode == GateMode::Toggle {
            self.net.adapter.frozen = false;
        }
        Ok((step, replay))
    }

    /// Forward, NCM update and one AdamW step on `CE + γ (L_p + L_s)`.
    pub fn train_step(&mut self, batch: &[Sample]) -> Result<StepOutcome> {
        if batch.is_empty() {
            return Err(Error::config("empty training batch"));
        }
        let start = Instant::now();
        self.iteration += 1;
        let refs: Vec<&Sample> = batch.iter().collect();
        let (x, labels) = stack(&refs, self.net.input_dim)?;
        for &y in &labels {
            if y >= self.seen.len() {
                return Err(Error::LabelOutOfRange {
                    row: 0,
                    label: y,
                    classes: self.seen.len(),
                });
            }
            self.seen[y] = true;
        }
        let pass = self.net.forward_batch(x.view())?;
        let online_errors = pass
            .logits
            .axis_iter(Axis(0))
            .zip(&labels)
            .filter(|(row, &y)| argmax_masked(row.view(), &self.seen) != y)
            .count();
        self.ncm
            .update_class_means(pass.representations.view(), &labels);
        let ncm_correct = pass
            .representations
            .axis_iter(Axis(0))
            .zip(&labels)
            .filter(|(r, &y)| matches!(self.ncm.predict(r.view()), Ok(p) if p == y))
            .count();

        let active = self.seen_classes();
        let ncm = &self.ncm;
        let (loss, grads) = training_objective(
            &self.net,
            x.view(),
            &labels,
            &active,
            |c| ncm.prototype(c).cloned(),
            self.config.gamma,
        )?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                iteration: self.iteration,
            });
        }
        self.apply(&grads);
        Ok(StepOutcome {
            loss,
            online_errors,
            ncm_accuracy: ncm_correct as f64 / labels.len() as f64,
            batch_time: start.elapsed(),
        })
    }

    /// Row-normalized confusion matrix of the softmax head on the buffer.
    pub fn buffer_confusion(&self) -> Result<Vec<Vec<f64>>> {
        let refs: Vec<&Sample> = self.buffer.contents().iter().collect();
        let (x, labels) = stack(&refs, self.net.input_dim)?;
        let pass = self.net.forward_batch(x.view())?;
        let predicted: Vec<usize> = pass
            .logits
            .axis_iter(Axis(0))
            .map(|row| argmax_masked(row, &self.seen))
            .collect();
        Ok(confusion_matrix(&labels, &predicted, self.net.classes()))
    }

    /// Off-diagonal pairs whose confusion exceeds τ.
    pub fn confused_pairs(&self, confusion: &[Vec<f64>]) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for (m, row) in confusion.iter().enumerate() {
            for (n, &v) in row.iter().enumerate() {
                if m != n && v > self.config.tau {
                    pairs.push((m, n));
                }
            }
        }
        pairs
    }

    /// Replay from the buffer; requires an access granted this iteration.
    pub fn replay_step(&mut self) -> Result<ReplayOutcome> {
        if !self.policy.is_open() {
            return Err(Error::AccessDenied);
        }
        if self.buffer.is_empty() {
            log::warn!("replay skipped at iteration {}: buffer is empty", self.iteration);
            return Ok(ReplayOutcome {
                pairs: Vec::new(),
                loss: 0.0,
                fallback: false,
            });
        }
        let pairs = match self.config.replay_strategy {
            ReplayStrategy::Targeted => {
                let confusion = self.buffer_confusion()?;
                self.confused_pairs(&confusion)
            }
            ReplayStrategy::Uniform => Vec::new(),
        };
        if pairs.is_empty() {
            let batch = self.buffer.sample_for_replay(&self.policy, None)?;
            let refs: Vec<&Sample> = batch.iter().collect();
            let (x, labels) = stack(&refs, self.net.input_dim)?;
            let pass = self.net.forward_batch(x.view())?;
            let (ce, grad_logits) = cross_entropy(pass.logits.view(), &labels);
            let grads = backward(
                &self.net,
                x.view(),
                pass.pre_activation.as_ref(),
                &pass.representations,
                &grad_logits,
                None,
            );
            if !ce.is_finite() {
                return Err(Error::NonFiniteLoss {
                    iteration: self.iteration,
                });
            }
            self.apply(&grads);
            return Ok(ReplayOutcome {
                pairs,
                loss: ce,
                fallback: self.config.replay_strategy == ReplayStrategy::Targeted,
            });
        }
        let mut total: Option<(f64, Gradients)> = None;
        for &(m, n) in &pairs {
            let batch = self.buffer.sample_for_replay(&self.policy, Some((m, n)))?;
            if batch.is_empty() {
                continue;
            }
            let refs: Vec<&Sample> = batch.iter().collect();
            let (x, labels) = stack(&refs, self.net.input_dim)?;
            let (lb, grads) =
                replay_objective(&self.net, x.view(), &labels, &[(m, n)], self.config.pair_softmax)?;
            match &mut total {
                Some((sum, acc)) => {
                    *sum += lb;
                    acc.add_assign(&grads);
                }
                None => total = Some((lb, grads)),
            }
        }
        let loss = match total {
            Some((lb, grads)) => {
                if !lb.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        iteration: self.iteration,
                    });
                }
                self.apply(&grads);
                lb
            }
            None => 0.0,
        };
        Ok(ReplayOutcome {
            pairs,
            loss,
            fallback: false,
        })
    }
}

/// Everything [`run`] needs besides data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub stream: StreamConfig,
    pub trainer: TrainerConfig,
    pub throughput: ModelThroughput,
}

/// Trains over the whole stream built from `train`, evaluating on `eval`.
///
/// Configuration errors are returned as `Err`. Failures during training end
/// the run early and are reported through [`RunLog::complete`] and
/// [`RunLog::error`].
pub fn run(train: &[Sample], eval: &[Sample], classes: usize, cfg: &RunConfig) -> Result<(RunLog, Trainer)> {
    cfg.stream.validate(classes)?;
    let dim = train
        .first()
        .map(|s| s.features.len())
        .ok_or_else(|| Error::config("training set is empty"))?;
    let mut trainer_cfg = cfg.trainer.clone();
    trainer_cfg.batch_size = cfg.stream.batch_size;
    let mut trainer = Trainer::new(trainer_cfg, dim, classes)?;
    let stream = build_stream(&cfg.stream, train)?;
    let mut sim = FlowSimulator::new(&stream, cfg.throughput)?;

    let tasks = stream.segments.len();
    let mut log = RunLog {
        records: Vec::new(),
        throughput: Vec::new(),
        iterations: 0,
        replay_steps: 0,
        task_classes: stream.segments.iter().map(|s| s.classes.clone()).collect(),
        task_online_error: vec![0.0; tasks],
        task_parameters: vec![trainer.net.parameter_vector()],
        task_end_s: Vec::new(),
        checkpoint: None,
        config: serde_json::to_value(cfg)?,
        complete: false,
        error: None,
    };
    let mut task_errors = vec![0usize; tasks];
    let mut task_seen = vec![0usize; tasks];
    let mut current_task: Option<usize> = None;
    let mut samples_seen = 0u64;

    let outcome: Result<()> = (|| {
        while let Some(drain) = sim.next_batch() {
            if drain.batch.is_empty() {
                break;
            }
            let segment = drain.batch[0].segment;
            if current_task != Some(segment) {
                if current_task.is_some() {
                    log.task_parameters.push(trainer.net.parameter_vector());
                    log.task_end_s.push(sparsity_stats(trainer.net.head.weights.view()).s);
                }
                trainer.start_task();
                current_task = Some(segment);
            }
            let batch: Vec<Sample> = drain.batch.iter().map(|t| t.sample.clone()).collect();
            let (step, replay) = trainer.process_batch(&batch)?;
            sim.complete_batch(&drain.batch, step.batch_time);
            samples_seen += batch.len() as u64;
            task_errors[segment] += step.online_errors;
            task_seen[segment] += batch.len();
            if replay.is_some() {
                log.replay_steps += 1;
            }
            if trainer.iteration() % trainer.config.eval_interval == 0 {
                log.records
                    .push(evaluation(&trainer, eval, samples_seen, segment, &sim)?);
            }
        }
        Ok(())
    })();

    log.iterations = trainer.iteration();
    if current_task.is_some() {
        log.task_parameters.push(trainer.net.parameter_vector());
        log.task_end_s.push(sparsity_stats(trainer.net.head.weights.view()).s);
    }
    for t in 0..tasks {
        if task_seen[t] > 0 {
            log.task_online_error[t] = task_errors[t] as f64 / task_seen[t] as f64;
        }
    }
    log.throughput = sim.records();
    match outcome {
        Ok(()) => {
            if log.records.last().map(|r| r.iteration) != Some(trainer.iteration()) && trainer.iteration() > 0 {
                let task = current_task.unwrap_or(0);
                match evaluation(&trainer, eval, samples_seen, task, &sim) {
                    Ok(r) => log.records.push(r),
                    Err(e) => log.error = Some(e.to_string()),
                }
            }
            log.complete = log.error.is_none();
        }
        Err(e) => {
            log::error!("run stopped at iteration {}: {e}", trainer.iteration());
            log.error = Some(e.to_string());
        }
    }
    Ok((log, trainer))
}

fn evaluation(
    trainer: &Trainer,
    eval: &[Sample],
    samples_seen: u64,
    task: usize,
    sim: &FlowSimulator<'_>,
) -> Result<crate::metrics::EvalRecord> {
    let mut record = evaluate(
        &trainer.net,
        &trainer.ncm,
        eval,
        trainer.seen(),
        trainer.iteration(),
        samples_seen,
    )?;
    record.task = task;
    record.v_m_measured = sim.records().get(task).and_then(|r| r.measured_v_m);
    Ok(record)
}
