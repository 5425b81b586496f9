use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use serde_json::Value;

use ocl_core::experiment::{run_experiment, ExperimentSpec};
use ocl_core::stream::ModelThroughput;
use ocl_core::synthetic::{write_synthetic, SyntheticSpec};
use ocl_core::{Error, Result};

/// Online continual learning over precomputed features.
///
/// Runs every seed and sweep point of an experiment spec and writes
/// per-run logs, a summary CSV and a bound report under `--out`.
#[derive(Debug, Parser)]
#[command(name = "ocl", version)]
struct Cli {
    /// Experiment spec (TOML or JSON). Flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, default_value = "results")]
    out: PathBuf,

    /// Dataset manifest or CSV file; replaces the synthetic generator.
    #[arg(long)]
    dataset: Option<PathBuf>,

    /// A single seed.
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,

    /// Comma-separated seed list.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,

    /// Stream arrival rate in samples per second.
    #[arg(long)]
    flow_rate: Option<f64>,

    /// Samples per second the model trains, `unlimited` or `measured`.
    #[arg(long)]
    model_throughput: Option<String>,

    #[arg(long)]
    gamma: Option<f64>,

    #[arg(long)]
    tau: Option<f64>,

    /// Replay period in iterations (`100`) or frequency (`0.01`).
    #[arg(long)]
    replay_freq: Option<f64>,

    #[arg(long)]
    buffer_size: Option<usize>,

    /// Freeze the adapter once the running task accuracy is high enough.
    #[arg(long)]
    lite: bool,

    /// Any field by dotted path, as `key=json`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Sweep axis as `key=v1,v2,...`.
    #[arg(long = "sweep", value_name = "KEY=VALUES")]
    sweeps: Vec<String>,

    /// Write the synthetic dataset of the spec into this directory and exit.
    #[arg(long, value_name = "DIR")]
    generate_synthetic: Option<PathBuf>,
}

fn parse_value(text: &str) -> Value {
    serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.to_string()))
}

fn split_pair(arg: &str) -> Result<(&str, &str)> {
    arg.split_once('=')
        .ok_or_else(|| Error::InvalidConfig(format!("expected KEY=VALUE, got {arg}")))
}

fn build_spec(cli: &Cli) -> Result<ExperimentSpec> {
    let mut spec = match &cli.config {
        Some(path) => ExperimentSpec::from_file(path)?,
        None => ExperimentSpec::default(),
    };
    if let Some(path) = &cli.dataset {
        spec.data.path = Some(path.clone());
    }
    if let Some(seed) = cli.seed {
        spec.seeds = vec![seed];
    }
    if let Some(seeds) = &cli.seeds {
        spec.seeds = seeds.clone();
    }
    if let Some(v) = cli.flow_rate {
        spec.stream.flow_rate = v;
    }
    if let Some(text) = &cli.model_throughput {
        spec.throughput = match text.as_str() {
            "unlimited" => ModelThroughput::Unlimited,
            "measured" => ModelThroughput::Measured,
            other => ModelThroughput::Fixed(other.parse().map_err(|_| {
                Error::InvalidConfig(format!("bad model throughput {other}"))
            })?),
        };
    }
    if let Some(v) = cli.gamma {
        spec.trainer.gamma = v;
    }
    if let Some(v) = cli.tau {
        spec.trainer.tau = v;
    }
    if let Some(v) = cli.replay_freq {
        if !(v > 0.0) {
            return Err(Error::InvalidConfig("replay frequency must be positive".into()));
        }
        let period = if v < 1.0 { 1.0 / v } else { v };
        spec.trainer.replay_every = period.round() as u64;
    }
    if let Some(v) = cli.buffer_size {
        spec.trainer.buffer_size = v;
    }
    if cli.lite {
        spec.trainer.lite_mode = true;
    }
    for arg in &cli.overrides {
        let (key, value) = split_pair(arg)?;
        spec.set(key, parse_value(value))?;
    }
    for arg in &cli.sweeps {
        let (key, values) = split_pair(arg)?;
        spec.sweep
            .insert(key.to_string(), values.split(',').map(parse_value).collect());
    }
    Ok(spec)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let spec = match build_spec(&cli) {
        Ok(spec) => spec,
        Err(e) => {
            log::error!("{e}");
            return ExitCode::from(2);
        }
    };
    if let Some(dir) = &cli.generate_synthetic {
        let synthetic = spec.data.synthetic.clone().unwrap_or_else(SyntheticSpec::default);
        return match write_synthetic(&synthetic, dir, "synthetic") {
            Ok(path) => {
                println!("{}", path.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                log::error!("{e}");
                ExitCode::FAILURE
            }
        };
    }
    match run_experiment(&spec, Some(&cli.out)) {
        Ok(outcome) => {
            print!("{}", outcome.summary_csv());
            if outcome.all_complete() {
                ExitCode::SUCCESS
            } else {
                log::error!("some runs did not complete; see run.jsonl files");
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            log::error!("{e}");
            ExitCode::FAILURE
        }
    }
}
