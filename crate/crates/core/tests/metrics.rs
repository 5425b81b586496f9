mod support;

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ocl_core::classifier::{LinearHead, NcmState, Network};
use ocl_core::dataset::Sample;
use ocl_core::metrics::{a_auc, evaluate, measure_throughput, EvalRecord};
use ocl_core::pacbayes::{report_from_run, PacBayesConfig};
use ocl_core::stream::{ModelThroughput, StreamConfig, StreamMode, TaskSchedule};
use ocl_core::trainer::{run, RunConfig, TrainerConfig};

use support::uniform_vec;

fn balanced(n: usize, dim: usize, seed: u64) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| Sample {
            features: uniform_vec(&mut rng, dim, -1.0, 1.0),
            label: i % 2,
            task_id: 0,
            arrival_index: i as u64,
        })
        .collect()
}

#[test]
fn random_head_is_at_chance() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let net = Network::init(6, None, 2, &mut rng);
    let ncm = NcmState::new(2, 0.1).unwrap();
    let eval = balanced(1000, 6, 2);
    let record = evaluate(&net, &ncm, &eval, &[true, true], 0, 0).unwrap();
    assert!((record.accuracy_softmax - 0.5).abs() <= 0.05, "{}", record.accuracy_softmax);
}

#[test]
fn constant_head_on_a_single_class() {
    let mut head = LinearHead::init(3, 2, &mut ChaCha8Rng::seed_from_u64(0));
    head.weights.fill(0.0);
    head.bias[1] = 1.0;
    let net = Network::new(ocl_core::classifier::Adapter::disabled(), head, 3).unwrap();
    let ncm = NcmState::new(2, 0.1).unwrap();
    let eval: Vec<Sample> = balanced(40, 3, 3).into_iter().map(|s| Sample { label: 1, ..s }).collect();
    let record = evaluate(&net, &ncm, &eval, &[true, true], 0, 0).unwrap();
    assert_eq!(record.accuracy_softmax, 1.0);
    assert_eq!(record.confusion[1], vec![0.0, 1.0]);
}

#[test]
fn evaluation_needs_seen_classes() {
    let net = Network::init(3, None, 2, &mut ChaCha8Rng::seed_from_u64(0));
    let ncm = NcmState::new(2, 0.1).unwrap();
    assert!(evaluate(&net, &ncm, &balanced(10, 3, 0), &[false, false], 0, 0).is_err());
}

#[test]
fn auc_stays_in_the_unit_interval() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let accs = uniform_vec(&mut rng, 20, 0.0, 1.0);
        let records: Vec<EvalRecord> = accs
            .iter()
            .enumerate()
            .map(|(i, &a)| EvalRecord {
                iteration: i as u64,
                samples_seen: (i as u64 + 1) * (i as u64 + 3),
                task: 0,
                accuracy_softmax: a,
                accuracy_ncm: a,
                confusion: vec![],
                per_class_s: vec![],
                per_class_m: vec![],
                zero_columns: vec![],
                v_m_measured: None,
            })
            .collect();
        let v = a_auc(&records).unwrap();
        assert!((0.0..=1.0).contains(&v));
    }
}

#[test]
fn sleep_calibrated_throughput() {
    let per_batch = Duration::from_millis(20);
    let times: Vec<f64> = (0..9)
        .map(|_| {
            let start = Instant::now();
            std::thread::sleep(per_batch);
            start.elapsed().as_secs_f64()
        })
        .collect();
    let v_m = measure_throughput(&times, 10);
    assert!((v_m - 500.0).abs() <= 50.0, "measured {v_m}");
}

fn two_task_config(throughput: ModelThroughput) -> RunConfig {
    RunConfig {
        stream: StreamConfig {
            schedule: TaskSchedule::split_classes(4, 2, 100.0, 4.0).unwrap(),
            flow_rate: 100.0,
            batch_size: 10,
            seed: 0,
            mode: StreamMode::ClassIncremental,
        },
        trainer: TrainerConfig {
            eval_interval: 10,
            hidden: Some(8),
            ..TrainerConfig::default()
        },
        throughput,
    }
}

#[test]
fn skipped_totals_follow_the_throughput_law() {
    let data = support::labelled_samples(200, 4, 3);
    let (log, _) = run(&data, &data[..40], 4, &two_task_config(ModelThroughput::Fixed(60.0))).unwrap();
    assert!(log.complete);
    assert_eq!(log.throughput.len(), 2);
    for rec in &log.throughput {
        assert_eq!(rec.arrived, 400);
        assert!((rec.processed as f64 - 240.0).abs() <= 10.0, "{rec:?}");
        assert_eq!(rec.processed + rec.skipped, rec.arrived);
    }
}

#[test]
fn bound_report_from_a_run() {
    let data = support::labelled_samples(200, 4, 3);
    let (log, _) = run(&data, &data[..40], 4, &two_task_config(ModelThroughput::Unlimited)).unwrap();
    assert_eq!(log.task_parameters.len(), 3);
    let report = report_from_run(&log, &PacBayesConfig::default()).unwrap();
    assert_eq!(report.tasks.len(), 2);
    for (task, rec) in report.tasks.iter().zip(&log.throughput) {
        assert_eq!(task.m, rec.processed as f64);
        assert!(task.kl > 0.0);
    }
    let t = report.terms;
    let sum = t.empirical_risk + t.throughput_term + t.divergence_term + t.confidence_term;
    assert!((t.total - sum).abs() < 1e-12);
}
