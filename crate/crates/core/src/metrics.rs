//! Memorization taxonomy and accuracy.
//!
//! Every training example falls in exactly one category. Clean examples
//! (given label = true label) are predicted correctly or wrongly; noisy
//! examples are predicted as the true class (correct), as the corrupted given
//! label (memorized), or as anything else (wrong).

use alloc::vec::Vec;

use crate::data::Example;
use crate::mlp::{ModelParams, Workspace};
use crate::prob::argmax;
use crate::Result;

/// Category of one prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Category {
    /// Clean label, predicted correctly.
    CleanCorrect,
    /// Clean label, predicted wrongly.
    CleanWrong,
    /// Noisy label, predicted as the true class.
    NoisyCorrect,
    /// Noisy label, predicted as neither the true nor the given class.
    NoisyWrong,
    /// Noisy label, predicted as the given (corrupted) class.
    NoisyMemorized,
}

/// Classifies one prediction.
pub fn classify_example(pred: usize, given: usize, truth: usize) -> Category {
    match (given == truth, pred == truth, pred == given) {
        (true, true, _) => Category::CleanCorrect,
        (true, false, _) => Category::CleanWrong,
        (false, true, _) => Category::NoisyCorrect,
        (false, false, true) => Category::NoisyMemorized,
        (false, false, false) => Category::NoisyWrong,
    }
}

/// Category counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counts {
    /// Clean, correct.
    pub clean_correct: usize,
    /// Clean, wrong.
    pub clean_wrong: usize,
    /// Noisy, true class predicted.
    pub noisy_correct: usize,
    /// Noisy, other class predicted.
    pub noisy_wrong: usize,
    /// Noisy, given label predicted.
    pub noisy_memorized: usize,
}

impl Counts {
    /// Adds one categorized example.
    pub fn add(&mut self, category: Category) {
        match category {
            Category::CleanCorrect => self.clean_correct += 1,
            Category::CleanWrong => self.clean_wrong += 1,
            Category::NoisyCorrect => self.noisy_correct += 1,
            Category::NoisyWrong => self.noisy_wrong += 1,
            Category::NoisyMemorized => self.noisy_memorized += 1,
        }
    }

    /// Sums two count sets.
    pub fn merge(&mut self, other: &Counts) {
        self.clean_correct += other.clean_correct;
        self.clean_wrong += other.clean_wrong;
        self.noisy_correct += other.noisy_correct;
        self.noisy_wrong += other.noisy_wrong;
        self.noisy_memorized += other.noisy_memorized;
    }

    /// Clean examples seen.
    pub fn clean(&self) -> usize {
        self.clean_correct + self.clean_wrong
    }

    /// Noisy examples seen.
    pub fn noisy(&self) -> usize {
        self.noisy_correct + self.noisy_wrong + self.noisy_memorized
    }

    /// Fractions over each group's own denominator; an empty group reports zeros.
    pub fn fractions(&self) -> Fractions {
        let frac = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        let (c, n) = (self.clean(), self.noisy());
        Fractions {
            clean_correct: frac(self.clean_correct, c),
            clean_wrong: frac(self.clean_wrong, c),
            noisy_correct: frac(self.noisy_correct, n),
            noisy_wrong: frac(self.noisy_wrong, n),
            noisy_memorized: frac(self.noisy_memorized, n),
        }
    }
}

/// The five taxonomy fractions.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Fractions {
    /// Over clean examples.
    pub clean_correct: f64,
    /// Over clean examples.
    pub clean_wrong: f64,
    /// Over noisy examples.
    pub noisy_correct: f64,
    /// Over noisy examples.
    pub noisy_wrong: f64,
    /// Over noisy examples.
    pub noisy_memorized: f64,
}

impl Fractions {
    fn scaled_add(&mut self, other: &Fractions, w: f64) {
        self.clean_correct += w * other.clean_correct;
        self.clean_wrong += w * other.clean_wrong;
        self.noisy_correct += w * other.noisy_correct;
        self.noisy_wrong += w * other.noisy_wrong;
        self.noisy_memorized += w * other.noisy_memorized;
    }
}

/// Where a breakdown was measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    /// Aggregated server model over all training data.
    Global,
    /// Freshly updated local models on their own data, before aggregation.
    Local,
}

impl Scope {
    /// Lowercase name used in the metrics stream.
    pub fn as_str(self) -> &'static str {
        match self {
            Scope::Global => "global",
            Scope::Local => "local",
        }
    }
}

/// Memorization taxonomy at one scope and round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemorizationBreakdown {
    /// Round index.
    pub round: usize,
    /// Measurement scope.
    pub scope: Scope,
    /// The fractions.
    pub fractions: Fractions,
}

/// How per-client local fractions are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LocalWeighting {
    /// Plain mean over participating noisy clients.
    #[default]
    Unweighted,
    /// Mean weighted by local dataset size.
    BySize,
}

/// Argmax prediction; ties go to the lowest class index.
pub fn predict(params: &ModelParams, x: &[f64], ws: &mut Workspace) -> Result<usize> {
    Ok(argmax(params.forward_with(x, ws)?))
}

/// Categorizes `params`' predictions on `examples`.
pub fn count_examples<'a>(params: &ModelParams, examples: impl IntoIterator<Item = &'a Example>) -> Result<Counts> {
    let mut ws = Workspace::new(params);
    let mut counts = Counts::default();
    for e in examples {
        let pred = predict(params, &e.features, &mut ws)?;
        counts.add(classify_example(pred, e.given_label.class, e.true_label.class));
    }
    Ok(counts)
}

/// Server-side taxonomy over every training example of every client.
pub fn global_breakdown<'a>(
    server: &ModelParams,
    examples: impl IntoIterator<Item = &'a Example>,
    round: usize,
) -> Result<MemorizationBreakdown> {
    Ok(MemorizationBreakdown {
        round,
        scope: Scope::Global,
        fractions: count_examples(server, examples)?.fractions(),
    })
}

/// Client-side taxonomy averaged over participating noisy clients.
///
/// `per_client` holds `(counts of the client's own data under its fresh
/// local model, noise rate, n_k)`. Returns `None` when no participant is noisy.
pub fn local_breakdown(
    per_client: &[(Counts, f64, usize)],
    weighting: LocalWeighting,
    round: usize,
) -> Option<MemorizationBreakdown> {
    let noisy: Vec<&(Counts, f64, usize)> = per_client.iter().filter(|(_, r, _)| *r > 0.0).collect();
    if noisy.is_empty() {
        return None;
    }
    let total: usize = noisy.iter().map(|(_, _, n)| n).sum();
    let mut acc = Fractions::default();
    for (counts, _, n) in &noisy {
        let w = match weighting {
            LocalWeighting::Unweighted => 1.0 / noisy.len() as f64,
            LocalWeighting::BySize => *n as f64 / total as f64,
        };
        acc.scaled_add(&counts.fractions(), w);
    }
    Some(MemorizationBreakdown {
        round,
        scope: Scope::Local,
        fractions: acc,
    })
}

/// Fraction of examples whose argmax prediction equals the true label.
pub fn test_accuracy(params: &ModelParams, test: &[Example]) -> Result<f64> {
    if test.is_empty() {
        return Ok(0.0);
    }
    let mut ws = Workspace::new(params);
    let mut hits = 0usize;
    for e in test {
        hits += (predict(params, &e.features, &mut ws)? == e.true_label.class) as usize;
    }
    Ok(hits as f64 / test.len() as f64)
}

/// Training phase of a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Cross-entropy FedAvg.
    Warmup,
    /// FedAvg with the FLR loss.
    Flr,
}

impl Phase {
    /// Phase of round `r` given `warmup_rounds`.
    pub fn of_round(r: usize, warmup_rounds: usize) -> Self {
        if r < warmup_rounds {
            Phase::Warmup
        } else {
            Phase::Flr
        }
    }

    /// Lowercase name used in the metrics stream.
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Warmup => "warmup",
            Phase::Flr => "flr",
        }
    }
}

/// Everything recorded after one aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundMetrics {
    /// Round index.
    pub round: usize,
    /// Phase the round ran in.
    pub phase: Phase,
    /// Server-side taxonomy.
    pub global: MemorizationBreakdown,
    /// Client-side taxonomy, absent when no noisy client participated.
    pub local: Option<MemorizationBreakdown>,
    /// Server accuracy on the held-out set.
    pub test_accuracy: f64,
    /// Size-weighted mean of the participants' last-epoch training loss.
    pub train_loss: f64,
}
