//! Experiment configuration: flat TOML sections, method presets, defaults
//! and validation with key paths.
//!
//! ```toml
//! seed = 1
//! method = "flr"          # ce | flr | elr | slr | er | fedprox | fedprox+flr
//! output_dir = "runs/flr"
//!
//! [dataset]    # classes, dim, train_per_class, test_per_class, spread, seed
//! [partition]  # mode = "iid" | "noniid", clients, p, alpha_dir, seed
//! [noise]      # kind = "symmetric" | "asymmetric", rho, tau, pair_map | pair_subset, seed
//! [model]      # hidden = [64, 64]
//! [trainer]    # local_epochs, batch_size, lr, momentum, weight_decay, fedprox_mu, participation
//! [schedule]   # alpha, beta, gamma, lambda, rounds, warmup_rounds, alpha_schedule
//! [metrics]    # local_weighting = "unweighted" | "by_size"
//!              # top-level local_metric_weighting is accepted too
//! [checkpoint] # every = K (0 writes only the final checkpoint)
//! ```
//!
//! Seeds of the dataset, partition and noise default to values derived from
//! the master seed, never from the method, so runs that differ only in
//! `method` train on identical data.

use std::fmt;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use flr_core::data::SyntheticSpec;
use flr_core::engine::TrainerConfig;
use flr_core::metrics::LocalWeighting;
use flr_core::noise::{cyclic_pair_map, NoiseKind, NoiseSpec};
use flr_core::optim::SgdConfig;
use flr_core::partition::{PartitionMode, PartitionSpec};
use flr_core::rng;
use flr_core::state::{AlphaSchedule, ScheduleParams};
use toml::{Table, Value};

use crate::error::{ConfigIssue, Result, SimError};

/// FedProx coefficient applied by the `fedprox` presets.
pub const DEFAULT_FEDPROX_MU: f64 = 0.001;

const SEED_DATASET: u64 = 0x0100;
const SEED_PARTITION: u64 = 0x0101;
const SEED_NOISE: u64 = 0x0102;

/// TOML integers are signed, so derived seeds keep 63 bits.
fn derived_seed(master: u64, tag: u64) -> u64 {
    rng::derive(master, tag, &[]) & i64::MAX as u64
}

/// Method presets; each is a pure expansion into coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Plain FedAvg with cross entropy (lambda = 0).
    Ce,
    /// Label-mixture regularization with the default coefficients.
    Flr,
    /// Local running average only (alpha = 0).
    Elr,
    /// Server running average only (alpha = 1, constant).
    Slr,
    /// Sharpening toward the current prediction (alpha = gamma = 0).
    Er,
    /// FedProx baseline (lambda = 0, mu > 0).
    Fedprox,
    /// FedProx proximal term plus FLR.
    FedproxFlr,
}

impl Method {
    /// Every preset, in display order.
    pub const ALL: [Method; 7] = [
        Method::Ce,
        Method::Flr,
        Method::Elr,
        Method::Slr,
        Method::Er,
        Method::Fedprox,
        Method::FedproxFlr,
    ];

    /// Name used in configs and on the command line.
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ce => "ce",
            Method::Flr => "flr",
            Method::Elr => "elr",
            Method::Slr => "slr",
            Method::Er => "er",
            Method::Fedprox => "fedprox",
            Method::FedproxFlr => "fedprox+flr",
        }
    }

    fn forced(self) -> Forced {
        let mut f = Forced::default();
        match self {
            Method::Ce => {
                f.lambda = Some(0.0);
                f.mu = Some(0.0);
            }
            Method::Flr => {}
            Method::Elr => f.alpha = Some(0.0),
            Method::Slr => {
                f.alpha = Some(1.0);
                f.alpha_schedule = Some(AlphaSchedule::Constant);
            }
            Method::Er => {
                f.alpha = Some(0.0);
                f.gamma = Some(0.0);
            }
            Method::Fedprox => {
                f.lambda = Some(0.0);
                f.mu = Some(DEFAULT_FEDPROX_MU);
            }
            Method::FedproxFlr => f.mu = Some(DEFAULT_FEDPROX_MU),
        }
        f
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Method::ALL.iter().map(|m| m.as_str()).collect();
                format!("unknown method `{s}`, expected one of {}", names.join(", "))
            })
    }
}

#[derive(Debug, Default)]
struct Forced {
    alpha: Option<f64>,
    gamma: Option<f64>,
    lambda: Option<f64>,
    mu: Option<f64>,
    alpha_schedule: Option<AlphaSchedule>,
}

/// A validated experiment with every default expanded.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Master seed (initialization, sampling, shuffling, derived data seeds).
    pub seed: u64,
    /// Method preset.
    pub method: Method,
    /// Output directory for the run's artifacts.
    pub output_dir: PathBuf,
    /// Synthetic dataset.
    pub dataset: SyntheticSpec,
    /// Client partition.
    pub partition: PartitionSpec,
    /// Label noise.
    pub noise: NoiseSpec,
    /// Hidden layer widths.
    pub hidden: Vec<usize>,
    /// Local training.
    pub trainer: TrainerConfig,
    /// FLR coefficients and schedules.
    pub schedule: ScheduleParams,
    /// Averaging rule of the local taxonomy.
    pub local_weighting: LocalWeighting,
    /// Checkpoint period in rounds; 0 keeps only the final checkpoint.
    pub checkpoint_every: usize,
    /// Preset overrides and other non-fatal remarks.
    pub warnings: Vec<String>,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    /// Replaces `seed`.
    pub seed: Option<u64>,
    /// Replaces `method`.
    pub preset: Option<Method>,
    /// Replaces `output_dir`.
    pub output_dir: Option<PathBuf>,
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("dataset", &["classes", "dim", "train_per_class", "test_per_class", "spread", "seed"]),
    ("partition", &["mode", "clients", "p", "alpha_dir", "seed"]),
    ("noise", &["kind", "rho", "tau", "pair_map", "pair_subset", "seed"]),
    ("model", &["hidden"]),
    (
        "trainer",
        &["local_epochs", "batch_size", "lr", "momentum", "weight_decay", "fedprox_mu", "participation"],
    ),
    (
        "schedule",
        &["alpha", "beta", "gamma", "lambda", "rounds", "warmup_rounds", "alpha_schedule"],
    ),
    ("metrics", &["local_weighting"]),
    ("checkpoint", &["every"]),
];
const TOP_LEVEL: &[&str] = &["seed", "method", "output_dir", "local_metric_weighting"];

/// Reads typed values out of one section, recording issues by key path.
struct Reader<'a> {
    section: &'a str,
    table: Option<&'a Table>,
    issues: &'a mut Vec<ConfigIssue>,
}

impl Reader<'_> {
    fn path(&self, key: &str) -> String {
        if self.section.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.section)
        }
    }

    fn raw(&self, key: &str) -> Option<&Value> {
        self.table.and_then(|t| t.get(key))
    }

    fn float(&mut self, key: &str) -> Option<f64> {
        match self.raw(key)? {
            Value::Float(f) => Some(*f),
            Value::Integer(i) => Some(*i as f64),
            _ => {
                let p = self.path(key);
                self.issues.push(ConfigIssue::new(p, "expected a number"));
                None
            }
        }
    }

    fn uint(&mut self, key: &str) -> Option<u64> {
        match self.raw(key)? {
            Value::Integer(i) if *i >= 0 => Some(*i as u64),
            _ => {
                let p = self.path(key);
                self.issues.push(ConfigIssue::new(p, "expected a nonnegative integer"));
                None
            }
        }
    }

    fn usize(&mut self, key: &str) -> Option<usize> {
        self.uint(key).map(|v| v as usize)
    }

    fn string(&mut self, key: &str) -> Option<String> {
        match self.raw(key)? {
            Value::String(s) => Some(s.clone()),
            _ => {
                let p = self.path(key);
                self.issues.push(ConfigIssue::new(p, "expected a string"));
                None
            }
        }
    }

    fn uint_list(&mut self, key: &str) -> Option<Vec<usize>> {
        let p = self.path(key);
        match self.raw(key)? {
            Value::Array(items) => {
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    match item {
                        Value::Integer(i) if *i >= 0 => out.push(*i as usize),
                        _ => {
                            self.issues
                                .push(ConfigIssue::new(p, "expected a list of nonnegative integers"));
                            return None;
                        }
                    }
                }
                Some(out)
            }
            _ => {
                self.issues.push(ConfigIssue::new(p, "expected a list"));
                None
            }
        }
    }

    fn parsed<T>(&mut self, key: &str, choices: &[(&str, T)]) -> Option<T>
    where
        T: Copy,
    {
        let s = self.string(key)?;
        match choices.iter().find(|(name, _)| *name == s) {
            Some((_, v)) => Some(*v),
            None => {
                let names: Vec<&str> = choices.iter().map(|(n, _)| *n).collect();
                let p = self.path(key);
                self.issues.push(ConfigIssue::new(
                    p,
                    format!("unknown value `{s}`, expected one of {}", names.join(", ")),
                ));
                None
            }
        }
    }
}

fn check_keys(root: &Table, issues: &mut Vec<ConfigIssue>) {
    for (key, value) in root {
        if let Some((_, allowed)) = SECTIONS.iter().find(|(s, _)| s == key) {
            match value {
                Value::Table(t) => {
                    for k in t.keys() {
                        if !allowed.contains(&k.as_str()) {
                            issues.push(ConfigIssue::new(format!("{key}.{k}"), "unknown key"));
                        }
                    }
                }
                _ => issues.push(ConfigIssue::new(key.clone(), "expected a section")),
            }
        } else if !TOP_LEVEL.contains(&key.as_str()) {
            issues.push(ConfigIssue::new(key.clone(), "unknown key"));
        }
    }
}

/// Resolves `explicit` against a preset-forced value, warning on conflicts.
fn resolve<T: PartialEq + fmt::Debug + Copy>(
    path: &str,
    explicit: Option<T>,
    forced: Option<T>,
    default: T,
    method: Method,
    warnings: &mut Vec<String>,
) -> T {
    match (explicit, forced) {
        (Some(e), Some(f)) if e != f => {
            warnings.push(format!(
                "{path} = {e:?} overrides preset `{method}` (which sets {f:?})"
            ));
            e
        }
        (Some(e), _) => e,
        (None, Some(f)) => f,
        (None, None) => default,
    }
}

/// Parses configuration text without command-line overrides.
pub fn parse_and_validate(text: &str) -> Result<ExperimentConfig> {
    parse_with_overrides(text, &Overrides::default())
}

/// Parses configuration text, applies overrides, expands the preset and
/// validates every invariant. All issues are reported together.
pub fn parse_with_overrides(text: &str, overrides: &Overrides) -> Result<ExperimentConfig> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| {
        SimError::Config(vec![ConfigIssue::new("<file>", e.to_string().trim().to_string())])
    })?;
    let mut issues = Vec::new();
    check_keys(&root, &mut issues);
    let section = |name: &str| root.get(name).and_then(Value::as_table);

    let mut top = Reader {
        section: "",
        table: Some(&root),
        issues: &mut issues,
    };
    let seed = overrides.seed.or_else(|| top.uint("seed")).unwrap_or(0);
    if seed > i64::MAX as u64 {
        top.issues.push(ConfigIssue::new("seed", "must fit in a signed 64-bit integer"));
    }
    let method = match overrides.preset {
        Some(m) => m,
        None => match top.string("method") {
            Some(s) => s.parse().unwrap_or_else(|msg: String| {
                top.issues.push(ConfigIssue::new("method", msg));
                Method::Flr
            }),
            None => Method::Flr,
        },
    };
    let output_dir = overrides
        .output_dir
        .clone()
        .or_else(|| top.string("output_dir").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(format!("runs/{}-seed{seed}", method.as_str().replace('+', "-"))));

    let mut warnings = Vec::new();

    // dataset
    let mut r = Reader {
        section: "dataset",
        table: section("dataset"),
        issues: &mut issues,
    };
    let dataset = SyntheticSpec {
        classes: r.usize("classes").unwrap_or(4),
        dim: r.usize("dim").unwrap_or(16),
        train_per_class: r.usize("train_per_class").unwrap_or(1000),
        test_per_class: r.usize("test_per_class").unwrap_or(250),
        spread: r.float("spread").unwrap_or(crate::defaults::SPREAD),
        seed: r.uint("seed").unwrap_or_else(|| derived_seed(seed, SEED_DATASET)),
    };

    // partition
    let mut r = Reader {
        section: "partition",
        table: section("partition"),
        issues: &mut issues,
    };
    #[derive(Clone, Copy)]
    enum Mode {
        Iid,
        NonIid,
    }
    let mode = r
        .parsed("mode", &[("iid", Mode::Iid), ("noniid", Mode::NonIid)])
        .unwrap_or(Mode::Iid);
    let clients = r.usize("clients").unwrap_or(20);
    let p = r.float("p").unwrap_or(0.7);
    let alpha_dir = r.float("alpha_dir").unwrap_or(1.0);
    let partition = PartitionSpec {
        mode: match mode {
            Mode::Iid => PartitionMode::Iid,
            Mode::NonIid => PartitionMode::NonIid { p, alpha_dir },
        },
        clients,
        seed: r.uint("seed").unwrap_or_else(|| derived_seed(seed, SEED_PARTITION)),
    };

    // noise
    let noise_table = section("noise");
    let mut r = Reader {
        section: "noise",
        table: noise_table,
        issues: &mut issues,
    };
    let kind = match noise_table {
        None => NoiseKind::Symmetric,
        Some(_) => match r.parsed(
            "kind",
            &[("symmetric", NoiseKind::Symmetric), ("asymmetric", NoiseKind::Asymmetric)],
        ) {
            Some(k) => k,
            None => {
                if r.raw("kind").is_none() {
                    r.issues.push(ConfigIssue::new(
                        "noise.kind",
                        "required when a [noise] section is present (symmetric | asymmetric)",
                    ));
                }
                NoiseKind::Symmetric
            }
        },
    };
    let pair_map = match (r.uint_list("pair_map"), r.uint_list("pair_subset")) {
        (Some(map), None) => map,
        (None, Some(subset)) => cyclic_pair_map(dataset.classes, &subset),
        (Some(map), Some(_)) => {
            r.issues.push(ConfigIssue::new(
                "noise.pair_subset",
                "give either pair_map or pair_subset, not both",
            ));
            map
        }
        (None, None) if kind == NoiseKind::Asymmetric => {
            cyclic_pair_map(dataset.classes, &(0..dataset.classes).collect::<Vec<_>>())
        }
        (None, None) => Vec::new(),
    };
    let noise = NoiseSpec {
        kind,
        rho: r.float("rho").unwrap_or(if noise_table.is_some() { 0.8 } else { 0.0 }),
        tau: r.float("tau").unwrap_or(0.0),
        pair_map,
        seed: r.uint("seed").unwrap_or_else(|| derived_seed(seed, SEED_NOISE)),
    };

    // model
    let mut r = Reader {
        section: "model",
        table: section("model"),
        issues: &mut issues,
    };
    let hidden = r.uint_list("hidden").unwrap_or_else(|| crate::defaults::HIDDEN.to_vec());

    // trainer and schedule, with preset expansion
    let forced = method.forced();
    let mut r = Reader {
        section: "trainer",
        table: section("trainer"),
        issues: &mut issues,
    };
    let local_epochs = r.usize("local_epochs").unwrap_or(crate::defaults::LOCAL_EPOCHS);
    let batch_size = r.usize("batch_size").unwrap_or(crate::defaults::BATCH_SIZE);
    let lr = r.float("lr").unwrap_or(crate::defaults::LR);
    let momentum = r.float("momentum").unwrap_or(0.0);
    let weight_decay = r.float("weight_decay").unwrap_or(0.0);
    let participation = r.float("participation").unwrap_or(crate::defaults::PARTICIPATION);
    let mu = r.float("fedprox_mu");
    let fedprox_mu = resolve("trainer.fedprox_mu", mu, forced.mu, 0.0, method, &mut warnings);

    let mut r = Reader {
        section: "schedule",
        table: section("schedule"),
        issues: &mut issues,
    };
    let default_lambda = match kind {
        NoiseKind::Symmetric => 2.0,
        NoiseKind::Asymmetric => 3.0,
    };
    let (alpha, beta, gamma, lambda) = (r.float("alpha"), r.float("beta"), r.float("gamma"), r.float("lambda"));
    let alpha_schedule = r.parsed(
        "alpha_schedule",
        &[("linear", AlphaSchedule::Linear), ("constant", AlphaSchedule::Constant)],
    );
    let rounds = r.usize("rounds").unwrap_or(200);
    let warmup_rounds = r.usize("warmup_rounds").unwrap_or(50.min(rounds));
    let schedule = ScheduleParams {
        alpha: resolve("schedule.alpha", alpha, forced.alpha, 0.9, method, &mut warnings),
        beta: beta.unwrap_or(0.7),
        gamma: resolve("schedule.gamma", gamma, forced.gamma, 0.5, method, &mut warnings),
        lambda: resolve("schedule.lambda", lambda, forced.lambda, default_lambda, method, &mut warnings),
        rounds,
        warmup_rounds,
        alpha_schedule: resolve(
            "schedule.alpha_schedule",
            alpha_schedule,
            forced.alpha_schedule,
            AlphaSchedule::Linear,
            method,
            &mut warnings,
        ),
    };

    let mut r = Reader {
        section: "metrics",
        table: section("metrics"),
        issues: &mut issues,
    };
    let choices = [("unweighted", LocalWeighting::Unweighted), ("by_size", LocalWeighting::BySize)];
    let sectioned = r.parsed("local_weighting", &choices);
    // top-level spelling accepted as well; the [metrics] key wins
    let mut top = Reader {
        section: "",
        table: Some(&root),
        issues: &mut issues,
    };
    let local_weighting = sectioned
        .or_else(|| top.parsed("local_metric_weighting", &choices))
        .unwrap_or_default();
    let mut r = Reader {
        section: "checkpoint",
        table: section("checkpoint"),
        issues: &mut issues,
    };
    let checkpoint_every = r.usize("every").unwrap_or(0);

    let config = ExperimentConfig {
        seed,
        method,
        output_dir,
        dataset,
        partition,
        noise,
        hidden,
        trainer: TrainerConfig {
            local_epochs,
            batch_size,
            sgd: SgdConfig {
                lr,
                momentum,
                weight_decay,
            },
            fedprox_mu,
            participation,
        },
        schedule,
        local_weighting,
        checkpoint_every,
        warnings,
    };
    config.check(&mut issues);
    if issues.is_empty() {
        Ok(config)
    } else {
        Err(SimError::Config(issues))
    }
}

impl ExperimentConfig {
    /// Layer sizes `[d, hidden.., C]`.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.dataset.dim];
        sizes.extend(&self.hidden);
        sizes.push(self.dataset.classes);
        sizes
    }

    fn check(&self, issues: &mut Vec<ConfigIssue>) {
        let mut bad = |path: &str, ok: bool, msg: &str| {
            if !ok {
                issues.push(ConfigIssue::new(path, msg));
            }
        };
        let d = &self.dataset;
        bad("dataset.classes", d.classes >= 2, "must be at least 2");
        bad("dataset.dim", d.dim >= 2, "must be at least 2");
        bad("dataset.train_per_class", d.train_per_class >= 1, "must be positive");
        bad("dataset.spread", d.spread > 0.0 && d.spread.is_finite(), "must be a positive real");

        let p = &self.partition;
        bad("partition.clients", p.clients >= 1, "must be positive");
        match p.mode {
            PartitionMode::Iid => bad(
                "partition.clients",
                p.clients == 0 || d.train_per_class % p.clients == 0,
                "must divide dataset.train_per_class in iid mode",
            ),
            PartitionMode::NonIid { p, alpha_dir } => {
                bad("partition.p", p > 0.0 && p <= 1.0, "must lie in (0, 1]");
                bad("partition.alpha_dir", alpha_dir > 0.0 && alpha_dir.is_finite(), "must be positive");
            }
        }

        let n = &self.noise;
        bad("noise.rho", (0.0..=1.0).contains(&n.rho), "must lie in [0, 1]");
        bad(
            "noise.tau",
            (0.0..1.0).contains(&n.tau),
            "must lie in [0, 1) so that U(tau, 1) is nondegenerate",
        );
        if n.kind == NoiseKind::Asymmetric {
            bad("noise.pair_map", !n.pair_map.is_empty(), "required for asymmetric noise");
            bad(
                "noise.pair_map",
                n.pair_map.is_empty() || n.pair_map.len() == d.classes,
                "needs one entry per class",
            );
            bad(
                "noise.pair_map",
                n.pair_map.iter().all(|&c| c < d.classes),
                "entries must be class indices",
            );
        }

        bad("model.hidden", self.hidden.iter().all(|&h| h > 0), "widths must be positive");

        let t = &self.trainer;
        bad("trainer.local_epochs", t.local_epochs >= 1, "must be positive");
        bad("trainer.batch_size", t.batch_size >= 1, "must be positive");
        bad("trainer.lr", t.sgd.lr > 0.0 && t.sgd.lr.is_finite(), "must be positive");
        bad("trainer.momentum", (0.0..1.0).contains(&t.sgd.momentum), "must lie in [0, 1)");
        bad("trainer.weight_decay", t.sgd.weight_decay >= 0.0, "must be nonnegative");
        bad("trainer.fedprox_mu", t.fedprox_mu >= 0.0 && t.fedprox_mu.is_finite(), "must be nonnegative");
        bad(
            "trainer.participation",
            t.participation > 0.0 && t.participation <= 1.0,
            "must lie in (0, 1]",
        );

        let s = &self.schedule;
        for (path, v) in [("schedule.alpha", s.alpha), ("schedule.beta", s.beta), ("schedule.gamma", s.gamma)] {
            bad(path, (0.0..=1.0).contains(&v), "must lie in [0, 1]");
        }
        bad("schedule.lambda", s.lambda >= 0.0 && s.lambda.is_finite(), "must be nonnegative");
        bad("schedule.rounds", s.rounds >= 1, "must be positive");
        bad(
            "schedule.warmup_rounds",
            s.warmup_rounds <= s.rounds,
            "must not exceed schedule.rounds",
        );
    }

    /// The resolved configuration as TOML; parsing it back yields `self`
    /// (warnings aside).
    pub fn to_toml(&self) -> String {
        let mut out = String::new();
        let f = |v: f64| format!("{v:?}");
        let list = |v: &[usize]| {
            let items: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            format!("[{}]", items.join(", "))
        };
        let _ = writeln!(out, "seed = {}", self.seed);
        let _ = writeln!(out, "method = \"{}\"", self.method);
        let _ = writeln!(out, "output_dir = {:?}", self.output_dir.display().to_string());
        let d = &self.dataset;
        let _ = writeln!(out, "\n[dataset]");
        let _ = writeln!(out, "classes = {}\ndim = {}", d.classes, d.dim);
        let _ = writeln!(out, "train_per_class = {}\ntest_per_class = {}", d.train_per_class, d.test_per_class);
        let _ = writeln!(out, "spread = {}\nseed = {}", f(d.spread), d.seed);
        let p = &self.partition;
        let _ = writeln!(out, "\n[partition]");
        match p.mode {
            PartitionMode::Iid => {
                let _ = writeln!(out, "mode = \"iid\"");
            }
            PartitionMode::NonIid { p, alpha_dir } => {
                let _ = writeln!(out, "mode = \"noniid\"\np = {}\nalpha_dir = {}", f(p), f(alpha_dir));
            }
        }
        let _ = writeln!(out, "clients = {}\nseed = {}", p.clients, p.seed);
        let n = &self.noise;
        let _ = writeln!(out, "\n[noise]");
        let kind = match n.kind {
            NoiseKind::Symmetric => "symmetric",
            NoiseKind::Asymmetric => "asymmetric",
        };
        let _ = writeln!(out, "kind = \"{kind}\"\nrho = {}\ntau = {}", f(n.rho), f(n.tau));
        if n.kind == NoiseKind::Asymmetric {
            let _ = writeln!(out, "pair_map = {}", list(&n.pair_map));
        }
        let _ = writeln!(out, "seed = {}", n.seed);
        let _ = writeln!(out, "\n[model]\nhidden = {}", list(&self.hidden));
        let t = &self.trainer;
        let _ = writeln!(out, "\n[trainer]");
        let _ = writeln!(out, "local_epochs = {}\nbatch_size = {}", t.local_epochs, t.batch_size);
        let _ = writeln!(out, "lr = {}\nmomentum = {}", f(t.sgd.lr), f(t.sgd.momentum));
        let _ = writeln!(out, "weight_decay = {}\nfedprox_mu = {}", f(t.sgd.weight_decay), f(t.fedprox_mu));
        let _ = writeln!(out, "participation = {}", f(t.participation));
        let s = &self.schedule;
        let _ = writeln!(out, "\n[schedule]");
        let _ = writeln!(out, "alpha = {}\nbeta = {}\ngamma = {}", f(s.alpha), f(s.beta), f(s.gamma));
        let _ = writeln!(out, "lambda = {}\nrounds = {}", f(s.lambda), s.rounds);
        let _ = writeln!(out, "warmup_rounds = {}", s.warmup_rounds);
        let sched = match s.alpha_schedule {
            AlphaSchedule::Linear => "linear",
            AlphaSchedule::Constant => "constant",
        };
        let _ = writeln!(out, "alpha_schedule = \"{sched}\"");
        let lw = match self.local_weighting {
            LocalWeighting::Unweighted => "unweighted",
            LocalWeighting::BySize => "by_size",
        };
        let _ = writeln!(out, "\n[metrics]\nlocal_weighting = \"{lw}\"");
        let _ = writeln!(out, "\n[checkpoint]\nevery = {}", self.checkpoint_every);
        out
    }
}
