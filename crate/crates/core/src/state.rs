//! Per-example pseudo-label state and the coefficient schedulers.
//!
//! Each client keeps, for every one of its examples, a running average `s`
//! of the server model's predictions and a running average `m` of its own
//! local predictions. The regularization target is `t = alpha * s +
//! (1 - alpha) * m`. Both averages are lazily initialized with the first
//! prediction they see and never leave the client.

use alloc::collections::BTreeMap;
use alloc::format;

use crate::prob::ProbVector;
use crate::{Error, Result};

/// How `alpha` evolves over rounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlphaSchedule {
    /// `alpha(r) = alpha * r / R`.
    #[default]
    Linear,
    /// `alpha(r) = alpha`.
    Constant,
}

/// FLR coefficients and round bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleParams {
    /// Weight of the global average in the mixture.
    pub alpha: f64,
    /// Momentum of the global average once active.
    pub beta: f64,
    /// Momentum of the local average once active.
    pub gamma: f64,
    /// Regularization strength.
    pub lambda: f64,
    /// Total rounds `R`.
    pub rounds: usize,
    /// Warmup rounds `R_w`: CE-only phase length and `gamma` switch-on.
    pub warmup_rounds: usize,
    /// Ramp applied to `alpha`.
    pub alpha_schedule: AlphaSchedule,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        Self {
            alpha: 0.9,
            beta: 0.7,
            gamma: 0.5,
            lambda: 2.0,
            rounds: 200,
            warmup_rounds: 50,
            alpha_schedule: AlphaSchedule::Linear,
        }
    }
}

impl ScheduleParams {
    /// Checks ranges and `R_w <= R`.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::config(format!("lambda must be nonnegative, got {}", self.lambda)));
        }
        if self.rounds == 0 {
            return Err(Error::config("rounds must be positive"));
        }
        if self.warmup_rounds > self.rounds {
            return Err(Error::config(format!(
                "warmup rounds {} exceed total rounds {}",
                self.warmup_rounds, self.rounds
            )));
        }
        Ok(())
    }

    /// Mixture weight at round `r`.
    pub fn alpha_at(&self, r: usize) -> f64 {
        match self.alpha_schedule {
            AlphaSchedule::Linear => self.alpha * r as f64 / self.rounds as f64,
            AlphaSchedule::Constant => self.alpha,
        }
    }

    /// Global-average momentum at round `r`: 0 before `R / 2`, then `beta`.
    pub fn beta_at(&self, r: usize) -> f64 {
        if 2 * r < self.rounds {
            0.0
        } else {
            self.beta
        }
    }

    /// Local-average momentum at round `r`: 0 before `R_w`, then `gamma`.
    pub fn gamma_at(&self, r: usize) -> f64 {
        if r < self.warmup_rounds {
            0.0
        } else {
            self.gamma
        }
    }
}

/// `alpha * s + (1 - alpha) * m`.
pub fn mix(s: &ProbVector, m: &ProbVector, alpha: f64) -> ProbVector {
    s.convex(m, alpha)
}

/// Running averages for one example.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PseudoLabel {
    /// Global running average; `None` until the first server prediction.
    pub s: Option<ProbVector>,
    /// Local running average; `None` until the first local prediction.
    pub m: Option<ProbVector>,
}

/// One client's pseudo-label store, keyed by example id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PseudoLabelStore {
    entries: BTreeMap<u64, PseudoLabel>,
}

fn ema(slot: &mut Option<ProbVector>, fresh: &ProbVector, momentum: f64) -> ProbVector {
    let next = match slot {
        None => fresh.clone(),
        Some(prev) => prev.convex(fresh, momentum),
    };
    *slot = Some(next.clone());
    next
}

impl PseudoLabelStore {
    /// An empty store.
    pub fn new() -> Self {
        Self::default()
    }

    /// `s <- beta * s + (1 - beta) * p_server`, or `s <- p_server` on first use.
    pub fn update_global_avg(&mut self, example_id: u64, p_server: &ProbVector, beta: f64) -> ProbVector {
        ema(&mut self.entries.entry(example_id).or_default().s, p_server, beta)
    }

    /// `m <- gamma * m + (1 - gamma) * p`, or `m <- p` on first use.
    pub fn update_local_avg(&mut self, example_id: u64, p: &ProbVector, gamma: f64) -> ProbVector {
        ema(&mut self.entries.entry(example_id).or_default().m, p, gamma)
    }

    /// The mixture target for `example_id`; both averages must be initialized.
    pub fn target(&self, example_id: u64, alpha: f64) -> Result<ProbVector> {
        let entry = self.entries.get(&example_id);
        match entry.map(|e| (&e.s, &e.m)) {
            Some((Some(s), Some(m))) => Ok(mix(s, m, alpha)),
            _ => Err(Error::State(format!(
                "pseudo label of example {example_id} used before initialization"
            ))),
        }
    }

    /// State of one example.
    pub fn get(&self, example_id: u64) -> Option<&PseudoLabel> {
        self.entries.get(&example_id)
    }

    /// Overwrites the state of one example (checkpoint restore).
    pub fn insert(&mut self, example_id: u64, state: PseudoLabel) {
        self.entries.insert(example_id, state);
    }

    /// Entries in ascending example-id order.
    pub fn iter(&self) -> impl Iterator<Item = (u64, &PseudoLabel)> {
        self.entries.iter().map(|(k, v)| (*k, v))
    }

    /// Number of examples with any state.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// True when nothing has been recorded yet.
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(v: &[f64]) -> ProbVector {
        ProbVector::new(v.to_vec()).unwrap()
    }

    fn close(a: &ProbVector, b: &[f64]) -> bool {
        a.as_slice().iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn global_average_updates() {
        let mut st = PseudoLabelStore::new();
        assert_eq!(st.update_global_avg(3, &pv(&[0.2, 0.8]), 0.7), pv(&[0.2, 0.8]));
        assert_eq!(st.update_global_avg(3, &pv(&[0.6, 0.4]), 0.0), pv(&[0.6, 0.4]));

        let mut st = PseudoLabelStore::new();
        st.update_global_avg(1, &pv(&[0.5, 0.5]), 0.0);
        let s = st.update_global_avg(1, &pv(&[1.0, 0.0]), 0.7);
        assert!(close(&s, &[0.65, 0.35]));
    }

    #[test]
    fn local_average_updates() {
        let mut st = PseudoLabelStore::new();
        assert_eq!(st.update_local_avg(9, &pv(&[0.9, 0.1]), 0.5), pv(&[0.9, 0.1]));
        let m = st.update_local_avg(9, &pv(&[0.2, 0.8]), 1.0);
        assert_eq!(m, pv(&[0.9, 0.1]));

        let mut st = PseudoLabelStore::new();
        st.update_local_avg(2, &pv(&[0.4, 0.6]), 0.0);
        let m = st.update_local_avg(2, &pv(&[0.8, 0.2]), 0.5);
        assert!(close(&m, &[0.6, 0.4]));
    }

    #[test]
    fn mixture_cases() {
        let (s, m) = (pv(&[1.0, 0.0]), pv(&[0.0, 1.0]));
        assert!(close(&mix(&s, &m, 0.9), &[0.9, 0.1]));
        assert_eq!(mix(&s, &m, 0.0), m);
        assert_eq!(mix(&s, &m, 1.0), s);
    }

    #[test]
    fn target_requires_both_averages() {
        let mut st = PseudoLabelStore::new();
        assert!(matches!(st.target(5, 0.5), Err(Error::State(_))));
        st.update_global_avg(5, &pv(&[0.5, 0.5]), 0.0);
        assert!(matches!(st.target(5, 0.5), Err(Error::State(_))));
        st.update_local_avg(5, &pv(&[0.1, 0.9]), 0.0);
        assert!(close(&st.target(5, 0.5).unwrap(), &[0.3, 0.7]));
    }

    #[test]
    fn schedulers() {
        let sp = ScheduleParams {
            alpha: 0.9,
            rounds: 300,
            ..Default::default()
        };
        assert!((sp.alpha_at(150) - 0.45).abs() < 1e-15);
        assert_eq!(sp.alpha_at(0), 0.0);
        assert_eq!(sp.alpha_at(300), 0.9);
        assert_eq!(sp.beta_at(149), 0.0);
        assert_eq!(sp.beta_at(150), 0.7);
        assert_eq!(sp.gamma_at(49), 0.0);
        assert_eq!(sp.gamma_at(50), 0.5);
        let no_warm = ScheduleParams {
            warmup_rounds: 0,
            ..sp
        };
        assert_eq!(no_warm.gamma_at(0), 0.5);
        let no_beta = ScheduleParams { beta: 0.0, ..sp };
        assert!((0..=300).all(|r| no_beta.beta_at(r) == 0.0));
        let constant = ScheduleParams {
            alpha_schedule: AlphaSchedule::Constant,
            ..sp
        };
        assert_eq!(constant.alpha_at(0), 0.9);
    }

    #[test]
    fn validation() {
        assert!(ScheduleParams::default().validate().is_ok());
        let bad = ScheduleParams {
            warmup_rounds: 10,
            rounds: 5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(ScheduleParams { gamma: 1.5, ..Default::default() }.validate().is_err());
    }
}
