//! Oracles shared by the integration tests. They avoid the partition and
//! pattern modules entirely and work from raw symbols, word measures or
//! floating-point circle arithmetic.
#![allow(dead_code)]

use std::collections::HashMap;

use maxpat::systems::rng::Rng64;
use maxpat::systems::{Phase, System, SystemSpec};

pub const GOLDEN: f64 = 0.618_033_988_749_894_9;

pub fn entropy(masses: impl IntoIterator<Item = f64>) -> f64 {
    masses.into_iter().filter(|&p| p > 0.0).map(|p| -p * p.ln()).sum()
}

/// Joint entropy of the length-`l` word partition at `pattern`. The joint
/// label is a bijective image of the symbols on the union of the windows, so
/// the entropy equals that of the gapped law on the union.
pub fn word_join_entropy(sys: &System, l: usize, pattern: &[usize]) -> f64 {
    let mut pos: Vec<usize> = pattern.iter().flat_map(|&t| t..t + l).collect();
    pos.sort_unstable();
    pos.dedup();
    entropy(sys.gapped_distribution(&pos).unwrap().into_iter().map(|(_, p)| p))
}

/// Best join entropy over all k-subsets of `0..=horizon`.
pub fn enumerate_best(sys: &System, l: usize, k: usize, horizon: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for_each_subset(horizon + 1, k, |s| best = best.max(word_join_entropy(sys, l, s)));
    best
}

pub fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    fn rec(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for t in start..=n - (k - cur.len()) {
            cur.push(t);
            rec(n, k, t + 1, cur, f);
            cur.pop();
        }
    }
    rec(n, k, 0, &mut Vec::new(), &mut f);
}

pub fn binomial(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Masses of the join of the Sturmian letter partition at `pattern`, from the
/// arcs cut by the points `-t alpha` and `c - t alpha`. Symbol `j` of the
/// orbit of `z` is 1 exactly when `z + j alpha mod 1` lies in `[c, 1)`.
pub fn sturmian_join_masses(alpha: f64, c: f64, pattern: &[usize]) -> Vec<f64> {
    let frac = |x: f64| x - x.floor();
    let mut cuts: Vec<f64> = pattern
        .iter()
        .flat_map(|&t| [frac(-(t as f64) * alpha), frac(c - t as f64 * alpha)])
        .collect();
    cuts.push(0.0);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let mut by_label: HashMap<Vec<u8>, f64> = HashMap::new();
    for i in 0..cuts.len() {
        let lo = cuts[i];
        let hi = if i + 1 < cuts.len() { cuts[i + 1] } else { 1.0 };
        if hi - lo < 1e-12 {
            continue;
        }
        let mid = 0.5 * (lo + hi);
        let label: Vec<u8> = pattern
            .iter()
            .map(|&t| u8::from(frac(mid + t as f64 * alpha) >= c))
            .collect();
        *by_label.entry(label).or_default() += hi - lo;
    }
    let mut m: Vec<f64> = by_label.into_values().collect();
    m.sort_by(f64::total_cmp);
    m
}

/// Stationary law of a row-stochastic matrix by power iteration.
pub fn stationary(p: &[Vec<f64>]) -> Vec<f64> {
    let n = p.len();
    let mut v = vec![1.0 / n as f64; n];
    for _ in 0..10_000 {
        let mut w = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                w[j] += v[i] * p[i][j];
            }
        }
        v = w;
    }
    v
}

/// Counting oracle for a substitution: frequency of `w` in `sigma^m(0)` read cyclically.
pub fn substitution_frequency(rules: &[Vec<u8>], m: usize, w: &[u8]) -> f64 {
    let mut s = vec![0u8];
    for _ in 0..m {
        s = s.iter().flat_map(|&a| rules[a as usize].iter().copied()).collect();
    }
    let n = s.len();
    let hits = (0..n).filter(|&i| (0..w.len()).all(|j| s[(i + j) % n] == w[j])).count();
    hits as f64 / n as f64
}

/// Reference systems whose setup is worth sharing.
pub struct Zoo {
    pub sturmian: System,
    pub rotation: System,
    pub thue_morse: System,
}

impl Zoo {
    pub fn new() -> Self {
        Zoo {
            sturmian: System::new(SystemSpec::golden_sturmian()).unwrap(),
            rotation: System::new(SystemSpec::golden_rotation()).unwrap(),
            thue_morse: System::new(SystemSpec::thue_morse()).unwrap(),
        }
    }

    /// A random symbolic system (two letters) with a word length in `{1, 2}`.
    pub fn symbolic(&self, rng: &mut Rng64) -> (System, usize) {
        let l = 1 + rng.below(2) as usize;
        let sys = match rng.below(4) {
            0 => {
                let p = 0.1 + 0.8 * rng.next_f64();
                System::new(SystemSpec::bernoulli(&[p, 1.0 - p])).unwrap()
            }
            1 => {
                let a = 0.1 + 0.8 * rng.next_f64();
                let b = 0.1 + 0.8 * rng.next_f64();
                System::new(SystemSpec::markov(vec![vec![a, 1.0 - a], vec![b, 1.0 - b]])).unwrap()
            }
            2 => self.sturmian.clone(),
            _ => self.thue_morse.clone(),
        };
        (sys, l)
    }

    pub fn random_cut(rng: &mut Rng64) -> Phase {
        Phase::from_f64(0.1 + 0.8 * rng.next_f64())
    }
}

/// A distribution near uniform: a random mix of uniform and a random point of the simplex.
pub fn near_uniform(rng: &mut Rng64, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| -(1.0 - rng.next_f64()).ln()).collect();
    let sum: f64 = raw.iter().sum();
    let t = rng.next_f64().powi(2);
    raw.iter().map(|r| (1.0 - t) / k as f64 + t * r / sum).collect()
}
