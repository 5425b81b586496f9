use std::fs;
use std::path::Path;
use std::process::Command;

use ndarray::{Array1, Array2};
use statrs::distribution::{ContinuousCDF, Normal};

use ocl_core::buffer::MemoryBuffer;
use ocl_core::classifier::{load_checkpoint, Adapter, LinearHead, Network};
use ocl_core::dataset::{load_dataset, Sample};
use ocl_core::experiment::{run_experiment, ExperimentSpec};
use ocl_core::synthetic::{generate_synthetic, SyntheticSpec};
use ocl_core::trainer::{Trainer, TrainerConfig};

fn small_spec() -> ExperimentSpec {
    let mut spec = ExperimentSpec::default();
    spec.data.synthetic = Some(SyntheticSpec {
        classes: 4,
        dim: 8,
        n_per_class: 50,
        confusable_pairs: vec![(0, 3)],
        ..SyntheticSpec::default()
    });
    spec.trainer.eval_interval = 5;
    spec.trainer.replay_every = 4;
    spec
}

fn jsonl_files(dir: &Path) -> usize {
    let mut count = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            count += jsonl_files(&path);
        } else if path.file_name().is_some_and(|n| n == "run.jsonl") {
            count += 1;
        }
    }
    count
}

#[test]
fn one_seed_gives_one_log_and_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = run_experiment(&small_spec(), Some(dir.path())).unwrap();
    assert!(outcome.all_complete());
    assert_eq!(jsonl_files(dir.path()), 1);
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2);
    assert!(summary.lines().nth(1).unwrap().starts_with("default,1,1,"));
}

#[test]
fn seed_and_gamma_sweep_cardinality() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = small_spec();
    spec.seeds = (0..5).collect();
    spec.sweep
        .insert("trainer.gamma".into(), vec![0.0.into(), 0.01.into(), 0.1.into()]);
    let outcome = run_experiment(&spec, Some(dir.path())).unwrap();
    assert_eq!(outcome.runs.len(), 15);
    assert_eq!(jsonl_files(dir.path()), 15);
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
    let reports: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("pacbayes.json")).unwrap()).unwrap();
    assert_eq!(reports.as_array().unwrap().len(), 15);
}

#[test]
fn rerun_gives_identical_summary_bytes() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut spec = small_spec();
    spec.seeds = vec![3, 4];
    run_experiment(&spec, Some(a.path())).unwrap();
    run_experiment(&spec, Some(b.path())).unwrap();
    let read = |d: &Path| fs::read(d.join("summary.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn checkpoint_and_buffer_restore() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = run_experiment(&small_spec(), Some(dir.path())).unwrap();
    let run_dir = dir.path().join("default").join("0");
    let (net, meta) = load_checkpoint(run_dir.join("head.json")).unwrap();
    assert_eq!(meta.d, 8);
    assert_eq!(meta.classes, 4);
    let last = outcome.runs[0].log.task_parameters.last().unwrap();
    assert_eq!(&net.parameter_vector(), last);
    let buffer = MemoryBuffer::load(run_dir.join("buffer")).unwrap();
    assert_eq!(buffer.len(), buffer.capacity().min(buffer.seen_count() as usize));

    let log = fs::read_to_string(run_dir.join("run.jsonl")).unwrap();
    let trailer: serde_json::Value = serde_json::from_str(log.lines().last().unwrap()).unwrap();
    assert_eq!(trailer["type"], "run");
    assert_eq!(trailer["complete"], true);
}

#[test]
fn csv_dataset_feeds_the_runner() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("a,b,label\n");
    for i in 0..60 {
        let label = i % 2;
        csv.push_str(&format!("{},{},{label}\n", label as f64 * 4.0 + 0.01 * i as f64, 1.0 - label as f64));
    }
    let csv_path = dir.path().join("toy.csv");
    fs::write(&csv_path, csv).unwrap();
    let loaded = load_dataset(&csv_path).unwrap();
    assert_eq!((loaded.len(), loaded.dim, loaded.classes), (60, 2, 2));

    let mut spec = ExperimentSpec::default();
    spec.data.path = Some(csv_path);
    spec.stream.classes_per_task = 1;
    let outcome = run_experiment(&spec, None).unwrap();
    assert!(outcome.all_complete());
    assert_eq!(outcome.runs[0].log.throughput.len(), 2);
}

#[test]
fn confusable_pair_matches_the_gaussian_overlap() {
    let spec = SyntheticSpec {
        n_per_class: 20_000,
        ..SyntheticSpec::default()
    };
    let data = generate_synthetic(&spec).unwrap();
    let means = spec.means().unwrap();
    let dist = |x: &[f64], m: &[f64]| x.iter().zip(m).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    let pair = data.samples.iter().filter(|s| s.label == 0 || s.label == 8);
    let (mut hits, mut total) = (0usize, 0usize);
    for s in pair {
        let guess = if dist(&s.features, &means[0]) <= dist(&s.features, &means[8]) { 0 } else { 8 };
        hits += usize::from(guess == s.label);
        total += 1;
    }
    let empirical = hits as f64 / total as f64;
    let bayes = Normal::new(0.0, 1.0).unwrap().cdf(0.5 / 2.0);
    assert!((bayes - 0.5987).abs() < 1e-4);
    assert!((empirical - bayes).abs() < 0.01, "{empirical} vs {bayes}");
}

fn overlap_sample(x: f64, label: usize) -> Sample {
    Sample {
        features: vec![x],
        label,
        task_id: 0,
        arrival_index: 0,
    }
}

#[test]
fn pair_selection_on_a_known_overlap() {
    let head = LinearHead {
        weights: Array2::from_shape_vec((1, 2), vec![-1.0, 1.0]).unwrap(),
        bias: Array1::zeros(2),
    };
    let net = Network::new(Adapter::disabled(), head, 1).unwrap();
    let mut batch = Vec::new();
    for i in 0..10 {
        let x = if i < 3 { 0.5 + 0.1 * i as f64 } else { -1.0 - 0.1 * i as f64 };
        batch.push(overlap_sample(x, 0));
        batch.push(overlap_sample(1.0 + 0.1 * i as f64, 1));
    }
    let expected = batch
        .iter()
        .filter(|s| s.label == 0)
        .filter(|s| {
            let logits = [-s.features[0], s.features[0]];
            logits[1] > logits[0]
        })
        .count() as f64
        / 10.0;
    assert_eq!(expected, 0.3);

    let pairs_at = |tau| {
        let cfg = TrainerConfig {
            tau,
            buffer_size: 100,
            ..TrainerConfig::default()
        };
        let mut trainer = Trainer::with_network(cfg, net.clone()).unwrap();
        trainer.buffer.update(batch.iter());
        for s in &batch {
            trainer.mark_seen(s.label).unwrap();
        }
        let confusion = trainer.buffer_confusion().unwrap();
        assert!((confusion[0][1] - expected).abs() < 1e-12);
        trainer.confused_pairs(&confusion)
    };
    assert_eq!(pairs_at(0.2), vec![(0, 1)]);
    assert!(pairs_at(0.4).is_empty());
}

fn ocl() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ocl"))
}

#[test]
fn cli_runs_a_configured_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    fs::write(
        &config,
        "seeds = [0]\n[data.synthetic]\nclasses = 4\ndim = 6\nn_per_class = 30\nconfusable_pairs = []\n[trainer]\neval_interval = 5\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let status = ocl()
        .args(["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .args(["--seeds", "1,2", "--flow-rate", "50", "--model-throughput", "30"])
        .args(["--gamma", "0.05", "--tau", "0.3", "--replay-freq", "0.1", "--buffer-size", "20", "--lite"])
        .env("RUST_LOG", "error")
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.starts_with("point,runs,complete,"));
    let log = fs::read_to_string(out.join("default").join("2").join("run.jsonl")).unwrap();
    let trailer: serde_json::Value = serde_json::from_str(log.lines().last().unwrap()).unwrap();
    let trainer = &trailer["config"]["trainer"];
    assert_eq!(trainer["gamma"], 0.05);
    assert_eq!(trainer["tau"], 0.3);
    assert_eq!(trainer["replay_every"], 10);
    assert_eq!(trainer["buffer_size"], 20);
    assert_eq!(trainer["lite_mode"], true);
    assert_eq!(trailer["config"]["stream"]["flow_rate"], 50.0);
}

#[test]
fn cli_generates_synthetic_data() {
    let dir = tempfile::tempdir().unwrap();
    let output = ocl()
        .args(["--generate-synthetic", dir.path().to_str().unwrap()])
        .args(["--set", "data.synthetic={\"n_per_class\": 5}"])
        .output()
        .unwrap();
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let data = load_dataset(dir.path().join("synthetic.json")).unwrap();
    assert_eq!(data.len(), 50);
}

#[test]
fn cli_rejects_a_bad_spec() {
    let output = ocl().args(["--set", "trainer.no_such_field=1"]).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    let output = ocl().args(["--seeds", ""]).output().unwrap();
    assert!(!output.status.success());
}
