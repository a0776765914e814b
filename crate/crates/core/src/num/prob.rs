use std::collections::HashSet;
use std::hash::Hash;

use serde::Serialize;

use crate::error::{invalid, Result};

/// Tolerance used for sum-to-one checks and entropy equality tests.
pub const PROB_TOL: f64 = 1e-9;

/// A finite probability distribution over labeled outcomes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbVector<L> {
    probs: Vec<f64>,
    labels: Vec<L>,
}

impl<L: Clone + Eq + Hash> ProbVector<L> {
    pub fn new(probs: Vec<f64>, labels: Vec<L>) -> Result<Self> {
        if probs.len() != labels.len() {
            return invalid(format!(
                "{} probabilities but {} labels",
                probs.len(),
                labels.len()
            ));
        }
        if probs.is_empty() {
            return invalid("empty probability vector");
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return invalid(format!("negative or non-finite probability {p}"));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            return invalid(format!("probabilities sum to {sum}, not 1"));
        }
        let mut seen = HashSet::with_capacity(labels.len());
        if !labels.iter().all(|l| seen.insert(l)) {
            return invalid("duplicate outcome labels");
        }
        Ok(Self { probs, labels })
    }

    pub fn labels(&self) -> &[L] {
        &self.labels
    }

    pub fn iter(&self) -> impl Iterator<Item = (&L, f64)> {
        self.labels.iter().zip(self.probs.iter().copied())
    }

    /// Probability of `label`, zero when the label is absent.
    pub fn prob_of(&self, label: &L) -> f64 {
        self.labels
            .iter()
            .position(|l| l == label)
            .map_or(0.0, |i| self.probs[i])
    }
}

impl ProbVector<usize> {
    /// Distribution labeled by outcome index `0..n`.
    pub fn indexed(probs: Vec<f64>) -> Result<Self> {
        let labels = (0..probs.len()).collect();
        Self::new(probs, labels)
    }
}

impl<L> ProbVector<L> {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Number of outcomes with strictly positive mass.
    pub fn support_size(&self) -> usize {
        self.probs.iter().filter(|p| **p > 0.0).count()
    }
}

/// `-p log p` with the convention `0 log 0 = 0`.
#[inline]
pub fn entropy_term(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        -p * p.ln()
    }
}

/// Shannon entropy in nats of a slice of masses. No validation.
pub fn entropy_of(masses: &[f64]) -> f64 {
    masses.iter().copied().map(entropy_term).sum()
}

/// Shannon entropy (nats) of a validated distribution.
pub fn shannon_entropy<L>(p: &ProbVector<L>) -> f64 {
    entropy_of(&p.probs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn uniform_four() {
        let p = ProbVector::indexed(vec![0.25; 4]).unwrap();
        assert_abs_diff_eq!(shannon_entropy(&p), 4f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(shannon_entropy(&p), 1.386294, epsilon = 1e-6);
    }

    #[test]
    fn degenerate_is_zero() {
        let p = ProbVector::indexed(vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(shannon_entropy(&p), 0.0);
    }

    #[test]
    fn dyadic() {
        let p = ProbVector::indexed(vec![0.5, 0.25, 0.25]).unwrap();
        assert_abs_diff_eq!(shannon_entropy(&p), 1.5 * 2f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(shannon_entropy(&p), 1.039721, epsilon = 1e-6);
    }

    #[test]
    fn rejects_bad_vectors() {
        assert!(ProbVector::indexed(vec![0.5, 0.6]).is_err());
        assert!(ProbVector::indexed(vec![1.5, -0.5]).is_err());
        assert!(ProbVector::new(vec![0.5, 0.5], vec!["a", "a"]).is_err());
        assert!(ProbVector::new(vec![1.0], vec!["a", "b"]).is_err());
        assert!(ProbVector::<u8>::new(vec![], vec![]).is_err());
    }

    fn simplex(k: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(0.0f64..1.0, k).prop_filter_map("zero mass", |v| {
            let s: f64 = v.iter().sum();
            (s > 1e-6).then(|| v.iter().map(|x| x / s).collect())
        })
    }

    proptest! {
        #[test]
        fn bounded_by_log_k(p in (2usize..9).prop_flat_map(simplex)) {
            let k = p.len();
            let h = entropy_of(&p);
            prop_assert!(h >= 0.0);
            prop_assert!(h <= (k as f64).ln() + PROB_TOL);
            if (h - (k as f64).ln()).abs() <= 1e-12 {
                prop_assert!(p.iter().all(|x| (x - 1.0 / k as f64).abs() < 1e-4));
            }
        }

        #[test]
        fn permutation_invariant(p in (2usize..9).prop_flat_map(simplex), rot in 0usize..8) {
            let mut q = p.clone();
            let r = rot % q.len();
            q.rotate_left(r);
            q.reverse();
            prop_assert!((entropy_of(&p) - entropy_of(&q)).abs() < 1e-12);
        }

        #[test]
        fn joint_subadditive(
            (a, b, w) in (2usize..5, 2usize..5)
                .prop_flat_map(|(a, b)| (Just(a), Just(b), simplex(a * b)))
        ) {
            let mut m1 = vec![0.0; a];
            let mut m2 = vec![0.0; b];
            for i in 0..a {
                for j in 0..b {
                    m1[i] += w[i * b + j];
                    m2[j] += w[i * b + j];
                }
            }
            prop_assert!(entropy_of(&w) <= entropy_of(&m1) + entropy_of(&m2) + PROB_TOL);
        }
    }
}
