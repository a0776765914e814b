use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::error::{invalid, Result};

/// A stationary Markov chain on a finite alphabet.
#[derive(Debug, Clone)]
pub struct MarkovChain {
    transition: Vec<Vec<f64>>,
    stationary: Vec<f64>,
    row_cdf: Vec<Vec<f64>>,
    stationary_cdf: Vec<f64>,
}

fn cdf(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    p.iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect()
}

impl MarkovChain {
    pub fn new(transition: Vec<Vec<f64>>, stationary: Option<Vec<f64>>) -> Result<Self> {
        let d = transition.len();
        if d < 2 {
            return invalid("Markov chain needs at least two states");
        }
        for (i, row) in transition.iter().enumerate() {
            if row.len() != d {
                return invalid(format!("transition row {i} has {} entries, expected {d}", row.len()));
            }
            if row.iter().any(|p| !(*p >= 0.0)) {
                return invalid(format!("transition row {i} has a negative entry"));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return invalid(format!("transition row {i} sums to {s}"));
            }
        }
        // Irreducibility: every state reaches every other.
        for start in 0..d {
            let mut seen = vec![false; d];
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(i) = stack.pop() {
                for j in 0..d {
                    if transition[i][j] > 0.0 && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            if let Some(j) = seen.iter().position(|s| !s) {
                return invalid(format!("transition matrix is reducible: {start} cannot reach {j}"));
            }
        }
        let stationary = match stationary {
            Some(pi) => pi,
            None => solve_stationary(&transition)?,
        };
        if stationary.len() != d {
            return invalid("stationary vector length differs from the number of states");
        }
        if stationary.iter().any(|p| !(*p > 0.0)) {
            return invalid("stationary vector must be strictly positive");
        }
        if (stationary.iter().sum::<f64>() - 1.0).abs() > 1e-10 {
            return invalid("stationary vector must sum to 1");
        }
        for j in 0..d {
            let v: f64 = (0..d).map(|i| stationary[i] * transition[i][j]).sum();
            if (v - stationary[j]).abs() > 1e-10 {
                return invalid(format!(
                    "stationary vector is not invariant: (piP)_{j} = {v}, pi_{j} = {}",
                    stationary[j]
                ));
            }
        }
        Ok(Self {
            row_cdf: transition.iter().map(|r| cdf(r)).collect(),
            stationary_cdf: cdf(&stationary),
            transition,
            stationary,
        })
    }

    pub fn states(&self) -> usize {
        self.transition.len()
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    pub(crate) fn stationary_cdf(&self) -> &[f64] {
        &self.stationary_cdf
    }

    pub(crate) fn row_cdf(&self, i: usize) -> &[f64] {
        &self.row_cdf[i]
    }

    pub fn word_probability(&self, w: &[u8]) -> f64 {
        let Some(&first) = w.first() else { return 1.0 };
        let mut p = self.stationary[first as usize];
        for pair in w.windows(2) {
            p *= self.transition[pair[0] as usize][pair[1] as usize];
        }
        p
    }

    /// Joint law of the symbols at increasing `positions`; zero-mass
    /// assignments omitted.
    pub fn gapped_distribution(&self, positions: &[usize]) -> Vec<(Vec<u8>, f64)> {
        let d = self.states();
        if positions.is_empty() {
            return vec![(Vec::new(), 1.0)];
        }
        let p = DMatrix::from_fn(d, d, |i, j| self.transition[i][j]);
        let mut powers: HashMap<usize, DMatrix<f64>> = HashMap::new();
        for w in positions.windows(2) {
            let gap = w[1] - w[0];
            powers
                .entry(gap)
                .or_insert_with(|| matrix_power(&p, gap));
        }
        let gaps: Vec<&DMatrix<f64>> = positions
            .windows(2)
            .map(|w| &powers[&(w[1] - w[0])])
            .collect();
        let mut out = Vec::new();
        let mut word = Vec::with_capacity(positions.len());
        fn rec(
            gaps: &[&DMatrix<f64>],
            d: usize,
            mass: f64,
            word: &mut Vec<u8>,
            out: &mut Vec<(Vec<u8>, f64)>,
        ) {
            let i = word.len() - 1;
            if i == gaps.len() {
                out.push((word.clone(), mass));
                return;
            }
            let prev = *word.last().unwrap() as usize;
            for b in 0..d {
                let q = gaps[i][(prev, b)];
                if q > 0.0 {
                    word.push(b as u8);
                    rec(gaps, d, mass * q, word, out);
                    word.pop();
                }
            }
        }
        for a in 0..d {
            word.clear();
            word.push(a as u8);
            rec(&gaps, d, self.stationary[a], &mut word, &mut out);
        }
        out
    }

    pub fn permuted(&self, perm: &[u8]) -> Result<Self> {
        let d = self.states();
        let mut t = vec![vec![0.0; d]; d];
        let mut pi = vec![0.0; d];
        for i in 0..d {
            pi[perm[i] as usize] = self.stationary[i];
            for j in 0..d {
                t[perm[i] as usize][perm[j] as usize] = self.transition[i][j];
            }
        }
        Self::new(t, Some(pi))
    }
}

fn matrix_power(p: &DMatrix<f64>, e: usize) -> DMatrix<f64> {
    let mut result = DMatrix::identity(p.nrows(), p.ncols());
    let mut base = p.clone();
    let mut e = e;
    while e > 0 {
        if e & 1 == 1 {
            result = &result * &base;
        }
        base = &base * &base;
        e >>= 1;
    }
    result
}

/// Solves `pi P = pi`, `sum pi = 1` by replacing one balance equation with the
/// normalisation row.
fn solve_stationary(transition: &[Vec<f64>]) -> Result<Vec<f64>> {
    let d = transition.len();
    let mut a = DMatrix::from_fn(d, d, |i, j| transition[j][i] - if i == j { 1.0 } else { 0.0 });
    let mut b = nalgebra::DVector::zeros(d);
    for j in 0..d {
        a[(d - 1, j)] = 1.0;
    }
    b[d - 1] = 1.0;
    match a.lu().solve(&b) {
        Some(x) => Ok(x.iter().copied().collect()),
        None => invalid("could not solve for the stationary distribution"),
    }
}
