//! Label corruption with exact, fixed-ratio counts.
//!
//! `floor(rho * N)` clients are chosen as noisy; each gets a rate
//! `r_k ~ U(tau, 1)` and exactly `round(r_k * n_k)` of its examples are
//! selected without replacement. Symmetric noise redraws the label uniformly
//! over all `C` classes (the old class included, so the effective flip rate is
//! `r_k (C - 1) / C`); asymmetric noise maps the true class through a pair map.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;

use crate::data::ClientShard;
use crate::prob::OneHotLabel;
use crate::rng;
use crate::{Error, Result};

/// Kind of corruption.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    /// Uniform redraw over all classes.
    Symmetric,
    /// Deterministic class-to-class mapping.
    Asymmetric,
}

/// Noise protocol parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    /// Symmetric or asymmetric.
    pub kind: NoiseKind,
    /// Fraction of noisy clients `rho` in `[0, 1]`.
    pub rho: f64,
    /// Lower bound `tau` in `[0, 1)` of a noisy client's rate.
    pub tau: f64,
    /// `pair_map[c]` is the corrupted class for true class `c`; fixed points
    /// are never corrupted. Only used by asymmetric noise.
    pub pair_map: Vec<usize>,
    /// Noise seed.
    pub seed: u64,
}

impl NoiseSpec {
    /// Range and pair-map checks against `classes`.
    pub fn validate(&self, classes: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::config(format!("noise.rho must lie in [0, 1], got {}", self.rho)));
        }
        if !(0.0..1.0).contains(&self.tau) {
            return Err(Error::config(format!("noise.tau must lie in [0, 1), got {}", self.tau)));
        }
        if self.kind == NoiseKind::Asymmetric {
            if self.pair_map.is_empty() {
                return Err(Error::config("noise.pair_map is required for asymmetric noise"));
            }
            if self.pair_map.len() != classes {
                return Err(Error::config(format!(
                    "noise.pair_map has {} entries for {classes} classes",
                    self.pair_map.len()
                )));
            }
            if let Some(bad) = self.pair_map.iter().find(|&&c| c >= classes) {
                return Err(Error::config(format!("noise.pair_map target {bad} out of range")));
            }
        }
        Ok(())
    }
}

/// Cyclic shift `c -> (c + 1) mod C` on the classes in `subset`, identity
/// elsewhere.
pub fn cyclic_pair_map(classes: usize, subset: &[usize]) -> Vec<usize> {
    (0..classes)
        .map(|c| if subset.contains(&c) { (c + 1) % classes } else { c })
        .collect()
}

/// One corrupted example.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorruptionEntry {
    /// Example id.
    pub example_id: u64,
    /// Owning client.
    pub client_id: usize,
    /// Label before corruption (the true class).
    pub old_class: usize,
    /// Label after corruption; equals `old_class` for symmetric self-draws.
    pub new_class: usize,
}

/// Record of every label reassignment.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionLog {
    /// Entries in injection order.
    pub entries: Vec<CorruptionEntry>,
    /// `transitions[old][new]` counts.
    pub transitions: Vec<Vec<usize>>,
    /// Number of examples selected for corruption.
    pub selected: usize,
}

impl CorruptionLog {
    /// An empty log over `classes` classes.
    pub fn new(classes: usize) -> Self {
        Self {
            entries: Vec::new(),
            transitions: vec![vec![0; classes]; classes],
            selected: 0,
        }
    }

    fn record(&mut self, entry: CorruptionEntry) {
        self.transitions[entry.old_class][entry.new_class] += 1;
        self.entries.push(entry);
    }

    /// Appends another log.
    pub fn merge(&mut self, other: CorruptionLog) {
        for e in other.entries {
            self.record(e);
        }
        self.selected += other.selected;
    }
}

/// Picks `floor(rho * N)` distinct noisy clients and draws `r_k ~ U(tau, 1)`
/// for each; returns `(client_id, r_k)` for every client in id order.
pub fn assign_noise_levels(clients: usize, spec: &NoiseSpec) -> Vec<(usize, f64)> {
    let noisy = libm::floor(spec.rho * clients as f64) as usize;
    let noisy = noisy.min(clients);
    let mut rng = rng::stream(spec.seed, rng::tag::NOISE_LEVELS, &[]);
    let mut chosen = index::sample(&mut rng, clients, noisy).into_vec();
    chosen.sort_unstable();
    let mut rates = vec![0.0; clients];
    for k in chosen {
        rates[k] = rng.random_range(spec.tau..1.0);
    }
    rates.into_iter().enumerate().collect()
}

/// Corrupts `round(r_k * n_k)` examples of `shard` chosen uniformly without
/// replacement.
pub fn inject_noise(mut shard: ClientShard, spec: &NoiseSpec, classes: usize) -> Result<(ClientShard, CorruptionLog)> {
    spec.validate(classes)?;
    if !(0.0..=1.0).contains(&shard.noise_rate) {
        return Err(Error::config(format!("noise rate {} outside [0, 1]", shard.noise_rate)));
    }
    let n = shard.len();
    let count = (libm::round(shard.noise_rate * n as f64) as usize).min(n);
    let mut rng = rng::stream(spec.seed, rng::tag::NOISE_INJECT, &[shard.client_id as u64]);
    let mut picked = index::sample(&mut rng, n, count).into_vec();
    picked.sort_unstable();
    let mut log = CorruptionLog::new(classes);
    log.selected = count;
    for i in picked {
        let example = &mut shard.examples[i];
        let old = example.true_label.class;
        let new = match spec.kind {
            NoiseKind::Symmetric => rng.random_range(0..classes),
            NoiseKind::Asymmetric => {
                let mapped = spec.pair_map[old];
                if mapped == old {
                    continue;
                }
                mapped
            }
        };
        example.given_label = OneHotLabel { class: new, classes };
        log.record(CorruptionEntry {
            example_id: example.id,
            client_id: shard.client_id,
            old_class: old,
            new_class: new,
        });
    }
    Ok((shard, log))
}

/// Assigns noise levels to all shards and corrupts them.
pub fn apply_noise(shards: Vec<ClientShard>, spec: &NoiseSpec, classes: usize) -> Result<(Vec<ClientShard>, CorruptionLog)> {
    spec.validate(classes)?;
    let levels = assign_noise_levels(shards.len(), spec);
    let mut log = CorruptionLog::new(classes);
    let mut out = Vec::with_capacity(shards.len());
    for (mut shard, (_, rate)) in shards.into_iter().zip(levels) {
        shard.noise_rate = rate;
        let (shard, l) = inject_noise(shard, spec, classes)?;
        log.merge(l);
        out.push(shard);
    }
    Ok((out, log))
}
