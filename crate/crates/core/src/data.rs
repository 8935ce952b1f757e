//! Examples, client shards and the synthetic Gaussian-cluster dataset.

use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};

use crate::prob::OneHotLabel;
use crate::rng;
use crate::{Error, Result};

/// A training or test example with its hidden ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    /// Unique within a run; keys the pseudo-label store.
    pub id: u64,
    /// Feature vector of length `d`.
    pub features: Vec<f64>,
    /// Label the learner sees (possibly corrupted).
    pub given_label: OneHotLabel,
    /// Ground-truth label, only used for metrics.
    pub true_label: OneHotLabel,
}

impl Example {
    /// True when the given label differs from the ground truth.
    pub fn is_noisy(&self) -> bool {
        self.given_label.class != self.true_label.class
    }
}

/// One client's local dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientShard {
    /// Client index in `[0, N)`.
    pub client_id: usize,
    /// Local examples, sorted by id.
    pub examples: Vec<Example>,
    /// Assigned noise rate `r_k` (0 for clean clients).
    pub noise_rate: f64,
}

impl ClientShard {
    /// Local dataset size `n_k`.
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    /// True for a shard without examples (never produced by the partitioners).
    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

/// Parameters of the synthetic benchmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    /// Number of classes `C >= 2`.
    pub classes: usize,
    /// Feature dimension `d >= 2`.
    pub dim: usize,
    /// Training examples per class.
    pub train_per_class: usize,
    /// Test examples per class.
    pub test_per_class: usize,
    /// Norm of every cluster center.
    pub spread: f64,
    /// Dataset seed.
    pub seed: u64,
}

/// Training and held-out test sets drawn from the same clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSplit {
    /// Cluster centers, one per class.
    pub centers: Vec<Vec<f64>>,
    /// Training examples, class-major, ids `0..n_train`.
    pub train: Vec<Example>,
    /// Test examples, class-major, ids following the training ids.
    pub test: Vec<Example>,
}

/// `C` isotropic unit-variance Gaussian clusters whose centers are random
/// unit vectors scaled by `spread`. Train and test samples come from
/// disjoint seed streams.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticSplit> {
    if spec.classes < 2 || spec.dim < 2 {
        return Err(Error::config("synthetic data needs C >= 2 and d >= 2"));
    }
    if !(spec.spread > 0.0 && spec.spread.is_finite()) {
        return Err(Error::config("spread must be a positive real"));
    }
    if spec.train_per_class == 0 {
        return Err(Error::config("train_per_class must be positive"));
    }
    let mut rng = rng::stream(spec.seed, rng::tag::CENTERS, &[]);
    let centers: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| {
            let mut v: Vec<f64> = (0..spec.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
            for x in &mut v {
                *x *= spec.spread / norm;
            }
            v
        })
        .collect();

    let draw = |tag: u64, per_class: usize, first_id: u64| -> Vec<Example> {
        let mut rng = rng::stream(spec.seed, tag, &[]);
        let mut out = Vec::with_capacity(per_class * spec.classes);
        for (class, center) in centers.iter().enumerate() {
            let label = OneHotLabel {
                class,
                classes: spec.classes,
            };
            for _ in 0..per_class {
                let features = center
                    .iter()
                    .map(|c| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        c + z
                    })
                    .collect();
                out.push(Example {
                    id: first_id + out.len() as u64,
                    features,
                    given_label: label,
                    true_label: label,
                });
            }
        }
        out
    };
    let train = draw(rng::tag::TRAIN, spec.train_per_class, 0);
    let test = draw(rng::tag::TEST, spec.test_per_class, train.len() as u64);
    Ok(SyntheticSplit {
        centers,
        train,
        test,
    })
}
