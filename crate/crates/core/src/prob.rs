//! Probability vectors and one-hot labels.

use alloc::format;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Tolerance on `sum(entries) == 1`.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// A categorical distribution over `C` classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Validates nonnegativity, finiteness and unit sum.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::config("probability vector must be nonempty"));
        }
        if let Some(bad) = entries.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::numeric(format!("invalid probability entry {bad}")));
        }
        let sum: f64 = entries.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::numeric(format!("probabilities sum to {sum}")));
        }
        Ok(Self(entries))
    }

    /// Wraps entries that are a probability vector by construction.
    pub(crate) fn from_vec_unchecked(entries: Vec<f64>) -> Self {
        debug_assert!(!entries.is_empty());
        Self(entries)
    }

    /// The uniform distribution over `classes` classes.
    pub fn uniform(classes: usize) -> Self {
        Self(alloc::vec![1.0 / classes as f64; classes])
    }

    /// All mass on `class`.
    pub fn one_hot(class: usize, classes: usize) -> Self {
        Self(OneHotLabel { class, classes }.to_vec())
    }

    /// Number of classes.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Always false; kept for API symmetry with slices.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Entries as a slice.
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Consumes the vector.
    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// `<self, other>`.
    pub fn dot(&self, other: &ProbVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    /// `weight * self + (1 - weight) * other`, entrywise.
    ///
    /// A convex combination of probability vectors is again one, and the
    /// endpoint weights reproduce their operand bit for bit.
    pub fn convex(&self, other: &ProbVector, weight: f64) -> ProbVector {
        debug_assert_eq!(self.len(), other.len());
        let rest = 1.0 - weight;
        ProbVector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| weight * a + rest * b)
                .collect(),
        )
    }

    /// Index of the largest entry; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// A class label over `classes` classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OneHotLabel {
    /// Index of the hot entry.
    pub class: usize,
    /// Vector length `C`.
    pub classes: usize,
}

impl OneHotLabel {
    /// Checked constructor.
    pub fn new(class: usize, classes: usize) -> Result<Self> {
        if class >= classes {
            return Err(Error::config(format!(
                "class {class} out of range for {classes} classes"
            )));
        }
        Ok(Self { class, classes })
    }

    /// Dense 0/1 form.
    pub fn to_vec(self) -> Vec<f64> {
        let mut v = alloc::vec![0.0; self.classes];
        v[self.class] = 1.0;
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_invalid_vectors() {
        assert!(ProbVector::new(alloc::vec![0.5, 0.6]).is_err());
        assert!(ProbVector::new(alloc::vec![1.5, -0.5]).is_err());
        assert!(ProbVector::new(alloc::vec![f64::NAN, 1.0]).is_err());
        assert!(ProbVector::new(alloc::vec![0.25; 4]).is_ok());
    }

    #[test]
    fn convex_endpoints_are_exact() {
        let a = ProbVector::new(alloc::vec![0.1, 0.2, 0.7]).unwrap();
        let b = ProbVector::new(alloc::vec![0.3, 0.3, 0.4]).unwrap();
        assert_eq!(a.convex(&b, 1.0), a);
        assert_eq!(a.convex(&b, 0.0), b);
    }

    #[test]
    fn one_hot_has_single_one() {
        let y = OneHotLabel::new(2, 4).unwrap().to_vec();
        assert_eq!(y, alloc::vec![0.0, 0.0, 1.0, 0.0]);
        assert!(OneHotLabel::new(4, 4).is_err());
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.3, 0.3, 0.1]), 0);
        assert_eq!(argmax(&[0.1, 0.45, 0.45]), 1);
    }
}
