use fixedbitset::FixedBitSet;
use serde::Serialize;

use crate::error::{invalid, Result};

/// A finite set of non-negative times observed inside the window `[0, window)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteTimeSet {
    bits: FixedBitSet,
}

impl FiniteTimeSet {
    pub fn empty(window: usize) -> Self {
        Self {
            bits: FixedBitSet::with_capacity(window),
        }
    }

    /// Builds the set from strictly increasing times, all below `window`.
    pub fn from_times(times: &[usize], window: usize) -> Result<Self> {
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("times must be strictly increasing");
        }
        if let Some(&t) = times.last() {
            if t >= window {
                return invalid(format!("time {t} outside window [0, {window})"));
            }
        }
        let mut bits = FixedBitSet::with_capacity(window);
        times.iter().for_each(|&t| bits.insert(t));
        Ok(Self { bits })
    }

    pub fn from_predicate(window: usize, mut member: impl FnMut(usize) -> bool) -> Self {
        let mut bits = FixedBitSet::with_capacity(window);
        for t in 0..window {
            if member(t) {
                bits.insert(t);
            }
        }
        Self { bits }
    }

    pub fn window(&self) -> usize {
        self.bits.len()
    }

    pub fn contains(&self, t: usize) -> bool {
        self.bits.contains(t)
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn times(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.ones()
    }

    /// `#(F ∩ [0, n))`.
    pub fn count_below(&self, n: usize) -> usize {
        self.bits.count_ones(..n.min(self.window()))
    }

    pub fn is_subset(&self, other: &FiniteTimeSet) -> bool {
        self.window() == other.window() && self.bits.is_subset(&other.bits)
    }
}

/// Finite-window stand-ins for the lower and upper asymptotic density.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityEstimate {
    /// `(N, #(F ∩ [0,N)) / N)` per checkpoint.
    pub window_densities: Vec<(usize, f64)>,
    pub lower_proxy: f64,
    pub upper_proxy: f64,
}

impl DensityEstimate {
    /// Checkpoint windows whose densities feed the proxies (the suffix half).
    pub fn suffix(&self) -> &[(usize, f64)] {
        let n = self.window_densities.len();
        &self.window_densities[n / 2..]
    }

    pub fn gap(&self) -> f64 {
        self.upper_proxy - self.lower_proxy
    }
}

/// Default checkpoints `{N/8, N/4, N/2, N}` (duplicates and zeros removed).
pub fn default_checkpoints(window: usize) -> Vec<usize> {
    let mut cps: Vec<usize> = [window / 8, window / 4, window / 2, window]
        .into_iter()
        .filter(|&n| n > 0)
        .collect();
    cps.dedup();
    cps
}

/// Densities of `f` on each checkpoint window; the liminf/limsup proxies are the
/// min/max over the last half of the checkpoints.
pub fn density_estimate(f: &FiniteTimeSet, checkpoints: &[usize]) -> Result<DensityEstimate> {
    if checkpoints.is_empty() {
        return invalid("no checkpoints given");
    }
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("checkpoints must be strictly increasing");
    }
    if checkpoints[0] == 0 {
        return invalid("checkpoint windows must be positive");
    }
    let last = *checkpoints.last().unwrap();
    if last > f.window() {
        return invalid(format!(
            "checkpoint {last} exceeds observation window {}",
            f.window()
        ));
    }
    let window_densities: Vec<(usize, f64)> = checkpoints
        .iter()
        .map(|&n| (n, f.count_below(n) as f64 / n as f64))
        .collect();
    let suffix = &window_densities[window_densities.len() / 2..];
    let lower_proxy = suffix.iter().map(|d| d.1).fold(f64::INFINITY, f64::min);
    let upper_proxy = suffix.iter().map(|d| d.1).fold(f64::NEG_INFINITY, f64::max);
    Ok(DensityEstimate {
        window_densities,
        lower_proxy,
        upper_proxy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::rng::Rng64;
    use proptest::prelude::*;

    #[test]
    fn even_numbers() {
        let evens: Vec<usize> = (0..1000).step_by(2).collect();
        let f = FiniteTimeSet::from_times(&evens, 1000).unwrap();
        let d = density_estimate(&f, &[250, 500, 1000]).unwrap();
        assert!(d.window_densities.iter().all(|w| w.1 == 0.5));
        assert_eq!((d.lower_proxy, d.upper_proxy), (0.5, 0.5));
    }

    #[test]
    fn empty_set() {
        let f = FiniteTimeSet::empty(100);
        let d = density_estimate(&f, &[10, 100]).unwrap();
        assert_eq!((d.lower_proxy, d.upper_proxy), (0.0, 0.0));
    }

    #[test]
    fn random_bitstream() {
        let n = 100_000;
        let mut rng = Rng64::new(0x5eed);
        let bits: Vec<bool> = (0..n).map(|_| rng.next_u64() & 1 == 1).collect();
        let f = FiniteTimeSet::from_predicate(n, |k| bits[k]);
        // Direct count on the same stream.
        let ones = bits.iter().filter(|b| **b).count();
        assert_eq!(f.len(), ones);
        let d = density_estimate(&f, &default_checkpoints(n)).unwrap();
        assert!(d.gap() <= 0.02);
        assert!((d.lower_proxy - 0.5).abs() <= 0.02 && (d.upper_proxy - 0.5).abs() <= 0.02);
    }

    #[test]
    fn errors() {
        let f = FiniteTimeSet::empty(10);
        assert!(density_estimate(&f, &[]).is_err());
        assert!(density_estimate(&f, &[5, 20]).is_err());
        assert!(density_estimate(&f, &[5, 5]).is_err());
        assert!(FiniteTimeSet::from_times(&[3, 2], 10).is_err());
        assert!(FiniteTimeSet::from_times(&[3, 10], 10).is_err());
    }

    proptest! {
        #[test]
        fn proxies_bracket_suffix(
            mask in proptest::collection::vec(any::<bool>(), 64..400),
            parts in 1usize..7,
        ) {
            let n = mask.len();
            let f = FiniteTimeSet::from_predicate(n, |k| mask[k]);
            let mut cps: Vec<usize> = (1..=parts).map(|i| (n * i) / parts).collect();
            cps.dedup();
            cps.retain(|&c| c > 0);
            let d = density_estimate(&f, &cps).unwrap();
            prop_assert!(d.lower_proxy <= d.upper_proxy);
            for &(_, v) in d.suffix() {
                prop_assert!(d.lower_proxy <= v && v <= d.upper_proxy);
            }
            for &(_, v) in &d.window_densities {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
