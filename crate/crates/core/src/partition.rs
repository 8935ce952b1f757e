//! Splitting a dataset across clients.
//!
//! The i.i.d. split gives every client the same number of examples of every
//! class. The non-i.i.d. split draws a class-presence matrix
//! `Phi[k][c] ~ Bernoulli(p)`, then divides each class among the clients that
//! have it according to `q_c ~ Dirichlet(alpha_dir)`, after first reserving
//! one example for each of those clients.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::data::{ClientShard, Example};
use crate::rng;
use crate::{Error, Result};

/// Maximum rounds of presence-matrix resampling before giving up.
pub const MAX_ELIGIBILITY_ATTEMPTS: usize = 1000;

/// Partitioning mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PartitionMode {
    /// Equal sizes and equal per-class counts.
    Iid,
    /// Bernoulli class presence plus Dirichlet shares.
    NonIid {
        /// Class-presence probability in `(0, 1]`.
        p: f64,
        /// Dirichlet concentration, positive.
        alpha_dir: f64,
    },
}

/// How to partition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionSpec {
    /// Mode and its parameters.
    pub mode: PartitionMode,
    /// Number of clients `N`.
    pub clients: usize,
    /// Partition seed.
    pub seed: u64,
}

/// Result of a non-i.i.d. split, keeping the presence matrix for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct NonIidPartition {
    /// Client shards in client-id order.
    pub shards: Vec<ClientShard>,
    /// `presence[k][c]` is `Phi_kc`.
    pub presence: Vec<Vec<bool>>,
}

/// Dispatches on [`PartitionSpec::mode`].
pub fn partition(examples: &[Example], classes: usize, spec: &PartitionSpec) -> Result<Vec<ClientShard>> {
    match spec.mode {
        PartitionMode::Iid => partition_iid(examples, classes, spec.clients, spec.seed),
        PartitionMode::NonIid { p, alpha_dir } => {
            Ok(partition_noniid(examples, classes, spec.clients, p, alpha_dir, spec.seed)?.shards)
        }
    }
}

fn by_class(examples: &[Example], classes: usize) -> Result<Vec<Vec<&Example>>> {
    let mut groups = vec![Vec::new(); classes];
    for e in examples {
        let c = e.true_label.class;
        if c >= classes {
            return Err(Error::config(format!("example {} has class {c} >= {classes}", e.id)));
        }
        groups[c].push(e);
    }
    Ok(groups)
}

fn into_shards(assigned: Vec<Vec<Example>>) -> Vec<ClientShard> {
    assigned
        .into_iter()
        .enumerate()
        .map(|(client_id, mut examples)| {
            examples.sort_by_key(|e| e.id);
            ClientShard {
                client_id,
                examples,
                noise_rate: 0.0,
            }
        })
        .collect()
}

/// Equal-size split with equal per-class counts; each class is shuffled
/// with the partition seed and dealt out in contiguous blocks.
pub fn partition_iid(examples: &[Example], classes: usize, clients: usize, seed: u64) -> Result<Vec<ClientShard>> {
    if clients == 0 {
        return Err(Error::config("partition needs at least one client"));
    }
    let groups = by_class(examples, classes)?;
    let mut assigned = vec![Vec::new(); clients];
    for (class, mut group) in groups.into_iter().enumerate() {
        if group.len() % clients != 0 {
            return Err(Error::config(format!(
                "class {class} has {} examples, not divisible by {clients} clients",
                group.len()
            )));
        }
        let mut rng = rng::stream(seed, rng::tag::PARTITION, &[class as u64]);
        group.shuffle(&mut rng);
        let per = group.len() / clients;
        for (k, chunk) in group.chunks(per.max(1)).enumerate().take(clients) {
            assigned[k].extend(chunk.iter().map(|e| (*e).clone()));
        }
    }
    Ok(into_shards(assigned))
}

/// Largest-remainder rounding of `weights * total` to integers summing to
/// `total`. Ties in the remainder go to the lower index.
pub fn largest_remainder(weights: &[f64], total: usize) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = if sum > 0.0 {
        weights.iter().map(|w| w / sum * total as f64).collect()
    } else {
        vec![total as f64 / weights.len() as f64; weights.len()]
    };
    let mut counts: Vec<usize> = quotas.iter().map(|q| libm::floor(*q) as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - counts[a] as f64;
        let rb = quotas[b] - counts[b] as f64;
        rb.partial_cmp(&ra).unwrap_or(core::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

fn dirichlet(rng: &mut ChaCha8Rng, alpha: f64, len: usize) -> Result<Vec<f64>> {
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::config(format!("dirichlet: {e}")))?;
    let draws: Vec<f64> = (0..len).map(|_| gamma.sample(rng)).collect();
    let sum: f64 = draws.iter().sum();
    if sum > 0.0 && sum.is_finite() {
        Ok(draws.into_iter().map(|g| g / sum).collect())
    } else {
        Ok(vec![1.0 / len as f64; len])
    }
}

/// Bernoulli-presence plus Dirichlet-share split.
///
/// Presence columns without any client and presence rows without any class
/// are redrawn (at most [`MAX_ELIGIBILITY_ATTEMPTS`] sweeps). Every eligible
/// client first receives one example of the class; the rest of the class is
/// apportioned by largest remainder over the Dirichlet shares.
pub fn partition_noniid(
    examples: &[Example],
    classes: usize,
    clients: usize,
    p: f64,
    alpha_dir: f64,
    seed: u64,
) -> Result<NonIidPartition> {
    if clients == 0 {
        return Err(Error::config("partition needs at least one client"));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::config(format!("partition.p must lie in (0, 1], got {p}")));
    }
    if !(alpha_dir > 0.0 && alpha_dir.is_finite()) {
        return Err(Error::config(format!("partition.alpha_dir must be positive, got {alpha_dir}")));
    }
    let groups = by_class(examples, classes)?;
    let mut rng = rng::stream(seed, rng::tag::PARTITION, &[u64::MAX]);
    let bern = |rng: &mut ChaCha8Rng| rng.random_bool(p);

    let mut presence: Vec<Vec<bool>> = (0..clients)
        .map(|_| (0..classes).map(|_| bern(&mut rng)).collect())
        .collect();
    let mut attempts = 0;
    loop {
        let empty_cols: Vec<usize> = (0..classes)
            .filter(|&c| presence.iter().all(|row| !row[c]))
            .collect();
        let empty_rows: Vec<usize> = (0..clients)
            .filter(|&k| presence[k].iter().all(|x| !x))
            .collect();
        if empty_cols.is_empty() && empty_rows.is_empty() {
            break;
        }
        attempts += 1;
        if attempts > MAX_ELIGIBILITY_ATTEMPTS {
            return Err(Error::config(format!(
                "partition.p = {p} too small: class presence still degenerate after {MAX_ELIGIBILITY_ATTEMPTS} resampling sweeps"
            )));
        }
        for c in empty_cols {
            for row in presence.iter_mut() {
                row[c] = bern(&mut rng);
            }
        }
        for k in empty_rows {
            for cell in presence[k].iter_mut() {
                *cell = bern(&mut rng);
            }
        }
    }

    let mut assigned: Vec<Vec<Example>> = vec![Vec::new(); clients];
    for (class, mut group) in groups.into_iter().enumerate() {
        let eligible: Vec<usize> = (0..clients).filter(|&k| presence[k][class]).collect();
        if group.len() < eligible.len() {
            return Err(Error::config(format!(
                "class {class} has {} examples for {} eligible clients",
                group.len(),
                eligible.len()
            )));
        }
        let mut class_rng = rng::stream(seed, rng::tag::PARTITION, &[class as u64]);
        group.shuffle(&mut class_rng);
        let shares = dirichlet(&mut class_rng, alpha_dir, eligible.len())?;
        let extra = largest_remainder(&shares, group.len() - eligible.len());
        let mut cursor = 0;
        for (slot, &k) in eligible.iter().enumerate() {
            let take = 1 + extra[slot];
            assigned[k].extend(group[cursor..cursor + take].iter().map(|e| (*e).clone()));
            cursor += take;
        }
        debug_assert_eq!(cursor, group.len());
    }
    let shards = into_shards(assigned);
    if let Some(empty) = shards.iter().find(|s| s.is_empty()) {
        return Err(Error::config(format!("client {} received no examples", empty.client_id)));
    }
    Ok(NonIidPartition { shards, presence })
}

/// Per-client class histogram, useful for tests and reports.
pub fn class_counts(shard: &ClientShard, classes: usize) -> Vec<usize> {
    let mut counts = vec![0; classes];
    for e in &shard.examples {
        counts[e.true_label.class] += 1;
    }
    counts
}

/// Multiset of example ids across shards, for conservation checks.
pub fn id_multiset(shards: &[ClientShard]) -> BTreeMap<u64, usize> {
    let mut m = BTreeMap::new();
    for s in shards {
        for e in &s.examples {
            *m.entry(e.id).or_insert(0) += 1;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticSpec};

    fn data(per_class: usize, classes: usize) -> Vec<Example> {
        generate_synthetic(&SyntheticSpec {
            classes,
            dim: 2,
            train_per_class: per_class,
            test_per_class: 0,
            spread: 2.0,
            seed: 5,
        })
        .unwrap()
        .train
    }

    #[test]
    fn iid_equal_shards() {
        let ex = data(100, 4);
        let shards = partition_iid(&ex, 4, 10, 1).unwrap();
        assert_eq!(shards.len(), 10);
        for s in &shards {
            assert_eq!(s.len(), 40);
            assert_eq!(class_counts(s, 4), vec![10; 4]);
        }
        let m = id_multiset(&shards);
        assert_eq!(m.len(), 400);
        assert!(m.values().all(|&c| c == 1));
    }

    #[test]
    fn iid_single_client_is_everything() {
        let ex = data(10, 3);
        let shards = partition_iid(&ex, 3, 1, 1).unwrap();
        assert_eq!(shards[0].examples, ex);
    }

    #[test]
    fn iid_rejects_indivisible() {
        let ex = data(10, 3);
        assert!(matches!(partition_iid(&ex, 3, 4, 1), Err(Error::Config(_))));
    }

    #[test]
    fn largest_remainder_conserves() {
        assert_eq!(largest_remainder(&[0.5, 0.25, 0.25], 4), vec![2, 1, 1]);
        assert_eq!(largest_remainder(&[1.0, 1.0, 1.0], 10), vec![4, 3, 3]);
        assert_eq!(largest_remainder(&[0.0, 0.0], 3), vec![2, 1]);
        assert_eq!(largest_remainder(&[0.7, 0.3], 0), vec![0, 0]);
    }

    #[test]
    fn noniid_near_uniform_for_huge_concentration() {
        let ex = data(200, 4);
        let part = partition_noniid(&ex, 4, 10, 1.0, 1e6, 3).unwrap();
        for c in 0..4 {
            let counts: Vec<usize> = part.shards.iter().map(|s| class_counts(s, 4)[c]).collect();
            let mean = 200.0 / 10.0;
            assert!(counts.iter().all(|&n| (n as f64 - mean).abs() <= 2.0), "{counts:?}");
        }
    }

    #[test]
    fn noniid_reports_hopeless_presence_probability() {
        let ex = data(5, 2);
        // With 1 client and 2 classes, both classes must be present; p tiny
        // makes that practically impossible.
        let err = partition_noniid(&ex, 2, 1, 1e-9, 1.0, 0).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
