//! Runs one configured experiment and writes its artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use flr_core::data::{generate_synthetic, ClientShard, Example, SyntheticSplit};
use flr_core::engine::{ClientJob, ClientUpdateResult, Executor, ExperimentSetup, Simulation};
use flr_core::metrics::RoundMetrics;
use flr_core::noise::{apply_noise, CorruptionLog};
use flr_core::partition::partition;
use flr_core::ModelParams;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::checkpoint;
use crate::config::ExperimentConfig;
use crate::error::{Result, SimError};
use crate::formats::{self, MetricsWriter};

/// Environment variable that roots relative output directories.
pub const OUTPUT_ROOT_ENV: &str = "FLR_OUTPUT_ROOT";

/// Artifact file names inside a run directory.
pub mod files {
    /// Resolved configuration.
    pub const CONFIG: &str = "config.toml";
    /// Training set export.
    pub const TRAIN: &str = "train.csv";
    /// Test set export.
    pub const TEST: &str = "test.csv";
    /// Corruption log.
    pub const CORRUPTION: &str = "corruption.csv";
    /// Metrics stream.
    pub const METRICS: &str = "metrics.csv";
    /// Run manifest.
    pub const MANIFEST: &str = "manifest.json";
}

/// Runs clients on the rayon pool; results keep the job order.
#[derive(Debug, Clone, Copy, Default)]
pub struct Parallel;

impl Executor for Parallel {
    fn execute(&self, jobs: Vec<ClientJob<'_>>) -> Vec<flr_core::Result<ClientUpdateResult>> {
        jobs.into_par_iter().map(ClientJob::run).collect()
    }
}

/// The materialized federated dataset of a configuration.
#[derive(Debug, Clone)]
pub struct PreparedData {
    /// Clean synthetic split.
    pub split: SyntheticSplit,
    /// Client shards after noise injection.
    pub shards: Vec<ClientShard>,
    /// Every label change.
    pub corruption: CorruptionLog,
}

/// Generates, partitions and corrupts the data. Depends only on the
/// dataset, partition and noise blocks.
pub fn prepare_data(config: &ExperimentConfig) -> Result<PreparedData> {
    let split = generate_synthetic(&config.dataset)?;
    let shards = partition(&split.train, config.dataset.classes, &config.partition)?;
    let (shards, corruption) = apply_noise(shards, &config.noise, config.dataset.classes)?;
    Ok(PreparedData {
        split,
        shards,
        corruption,
    })
}

/// Engine setup for a configuration and its data.
pub fn experiment_setup(config: &ExperimentConfig, shards: Vec<ClientShard>, test: Vec<Example>) -> ExperimentSetup {
    ExperimentSetup {
        shards,
        test,
        layer_sizes: config.layer_sizes(),
        trainer: config.trainer,
        schedule: config.schedule,
        seed: config.seed,
        local_weighting: config.local_weighting,
        record_targets: false,
    }
}

/// Runs a configuration in memory, without writing anything.
pub fn run_in_memory(config: &ExperimentConfig) -> Result<(ModelParams, Vec<RoundMetrics>)> {
    let data = prepare_data(config)?;
    let setup = experiment_setup(config, data.shards, data.split.test);
    Ok(flr_core::engine::run_experiment(setup, &Parallel, |_, _| Ok(()))?)
}

/// Options of [`run`].
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Continue from the checkpoint in the output directory if one exists.
    pub resume: bool,
    /// Stop after this many rounds have completed in total (the checkpoint
    /// is still written), leaving the run resumable.
    pub stop_after: Option<usize>,
}

/// Versions recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    /// Simulator package version.
    pub flr_sim: String,
    /// Core library version.
    pub flr_core: String,
}

/// What a run produced; written as `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Run directory.
    pub output_dir: PathBuf,
    /// Method preset.
    pub method: String,
    /// Master seed.
    pub seed: u64,
    /// Resolved configuration, every default expanded.
    pub resolved_config: String,
    /// SHA-256 of the resolved configuration.
    pub config_sha256: String,
    /// SHA-256 over the train, test and corruption exports.
    pub dataset_sha256: String,
    /// Artifact name to path relative to the run directory.
    pub artifacts: BTreeMap<String, String>,
    /// Rounds completed.
    pub rounds_completed: usize,
    /// Best test accuracy over completed rounds.
    pub best_test_accuracy: f64,
    /// Package versions.
    pub versions: Versions,
    /// Wall-clock duration of this invocation in seconds.
    pub duration_secs: f64,
    /// Preset overrides reported during validation.
    pub warnings: Vec<String>,
}

/// Applies the output-root override to a relative output directory.
pub fn resolve_output_dir(dir: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if dir.is_relative() && !root.is_empty() => PathBuf::from(root).join(dir),
        _ => dir.to_path_buf(),
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// SHA-256 over the dataset exports of a run directory.
pub fn dataset_hash(run_dir: &Path) -> Result<String> {
    let mut h = Sha256::new();
    for name in [files::TRAIN, files::TEST, files::CORRUPTION] {
        let path = run_dir.join(name);
        let bytes = fs::read(&path).map_err(|e| SimError::io(&path, e))?;
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}

/// Keeps the header and the rows of rounds before `next_round`.
fn truncate_metrics(path: &Path, next_round: usize) -> Result<()> {
    let text = fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    let mut kept = String::new();
    for (i, line) in text.lines().enumerate() {
        let keep = i == 0
            || line
                .split(',')
                .next()
                .and_then(|r| r.parse::<usize>().ok())
                .is_some_and(|r| r < next_round);
        if keep {
            kept.push_str(line);
            kept.push('\n');
        }
    }
    fs::write(path, kept).map_err(|e| SimError::io(path, e))
}

fn best_accuracy(path: &Path) -> Result<f64> {
    Ok(formats::read_metrics(path)?
        .iter()
        .map(|r| r.test_acc)
        .fold(0.0, f64::max))
}

/// Runs a validated configuration, writing every artifact under its output
/// directory. Re-running with the same configuration rewrites identical
/// files, the manifest's duration aside.
pub fn run(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunManifest> {
    let started = Instant::now();
    let dir = resolve_output_dir(&config.output_dir);
    fs::create_dir_all(&dir).map_err(|e| SimError::io(&dir, e))?;

    let resolved = config.to_toml();
    let config_sha = sha256_hex(resolved.as_bytes());
    let classes = config.dataset.classes;

    let data = prepare_data(config)?;
    let config_path = dir.join(files::CONFIG);
    fs::write(&config_path, &resolved).map_err(|e| SimError::io(&config_path, e))?;
    formats::write_train(&dir.join(files::TRAIN), &data.shards, config.dataset.dim)?;
    formats::write_test(&dir.join(files::TEST), &data.split.test, config.dataset.dim)?;
    formats::write_corruption(&dir.join(files::CORRUPTION), &data.corruption)?;
    let dataset_sha = dataset_hash(&dir)?;

    let setup = experiment_setup(config, data.shards, data.split.test);
    let metrics_path = dir.join(files::METRICS);
    let resume_from = if opts.resume && checkpoint::header_path(&dir).exists() {
        let ckpt = checkpoint::load(&dir, classes)?;
        if ckpt.config_sha256 != config_sha {
            return Err(SimError::format(
                checkpoint::header_path(&dir),
                "checkpoint was written by a different configuration",
            ));
        }
        Some(ckpt)
    } else {
        None
    };
    let (mut sim, mut writer) = match resume_from {
        Some(ckpt) => {
            truncate_metrics(&metrics_path, ckpt.next_round)?;
            let sim = Simulation::restore(setup, ckpt.server, ckpt.stores, ckpt.next_round)?;
            (sim, MetricsWriter::append(&metrics_path)?)
        }
        None => (Simulation::new(setup)?, MetricsWriter::create(&metrics_path)?),
    };

    let every = config.checkpoint_every;
    let stop = opts.stop_after.unwrap_or(usize::MAX);
    while !sim.finished() && sim.next_round() < stop {
        let report = sim.step(&Parallel)?;
        writer.push(&report.metrics)?;
        let done = sim.next_round();
        if every > 0 && done % every == 0 && !sim.finished() {
            checkpoint::save(&dir, done, &config_sha, sim.server(), sim.stores(), classes)?;
        }
    }
    writer.finish()?;
    checkpoint::save(&dir, sim.next_round(), &config_sha, sim.server(), sim.stores(), classes)?;

    let mut artifacts = BTreeMap::new();
    for name in [
        files::CONFIG,
        files::TRAIN,
        files::TEST,
        files::CORRUPTION,
        files::METRICS,
        files::MANIFEST,
    ] {
        artifacts.insert(name.trim_end_matches(".csv").to_string(), name.to_string());
    }
    artifacts.insert(
        "checkpoint".into(),
        format!("{}/checkpoint.json", checkpoint::DIR),
    );
    let manifest = RunManifest {
        output_dir: dir.clone(),
        method: config.method.to_string(),
        seed: config.seed,
        resolved_config: resolved,
        config_sha256: config_sha,
        dataset_sha256: dataset_sha,
        artifacts,
        rounds_completed: sim.next_round(),
        best_test_accuracy: best_accuracy(&metrics_path)?,
        versions: Versions {
            flr_sim: env!("CARGO_PKG_VERSION").to_string(),
            flr_core: flr_core::VERSION.to_string(),
        },
        duration_secs: started.elapsed().as_secs_f64(),
        warnings: config.warnings.clone(),
    };
    let path = dir.join(files::MANIFEST);
    let mut f = fs::File::create(&path).map_err(|e| SimError::io(&path, e))?;
    serde_json::to_writer_pretty(&mut f, &manifest).map_err(|e| SimError::format(&path, e.to_string()))?;
    f.write_all(b"\n").map_err(|e| SimError::io(&path, e))?;
    Ok(manifest)
}
