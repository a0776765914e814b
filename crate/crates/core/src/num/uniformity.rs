use crate::error::{invalid, Result};
use crate::num::prob::entropy_of;

/// Grid resolution used to cross-check the extremal family for `k <= 4`.
const GRID_STEPS: usize = 48;

/// Entropy of the distribution with one coordinate at `q` and the remaining
/// mass spread uniformly over the other `k - 1` coordinates.
fn perturbed_entropy(k: usize, q: f64) -> f64 {
    let rest = (1.0 - q) / (k - 1) as f64;
    let mut masses = vec![rest; k];
    masses[0] = q;
    entropy_of(&masses)
}

/// Largest entropy of a `k`-atom distribution that has some atom at distance
/// at least `eps` from `1/k`.
///
/// For a fixed value of one coordinate, entropy is maximised by spreading the
/// rest uniformly, and along that family entropy is concave with its peak at
/// `1/k`. So the constrained maximum sits on `|q - 1/k| = eps` exactly.
fn constrained_max_entropy(k: usize, eps: f64) -> f64 {
    let u = 1.0 / k as f64;
    let mut best = f64::NEG_INFINITY;
    for q in [u + eps, u - eps] {
        if (-1e-15..=1.0 + 1e-15).contains(&q) {
            best = best.max(perturbed_entropy(k, q.clamp(0.0, 1.0)));
        }
    }
    best
}

/// Exhaustive scan of the simplex grid with step `1/steps`.
fn grid_max_entropy(k: usize, eps: f64, steps: usize) -> f64 {
    let u = 1.0 / k as f64;
    let mut best = f64::NEG_INFINITY;
    let mut counts = vec![0usize; k];
    fn rec(
        i: usize,
        left: usize,
        counts: &mut Vec<usize>,
        steps: usize,
        u: f64,
        eps: f64,
        best: &mut f64,
    ) {
        let k = counts.len();
        if i == k - 1 {
            counts[i] = left;
            let q: Vec<f64> = counts.iter().map(|&c| c as f64 / steps as f64).collect();
            if q.iter().any(|x| (x - u).abs() >= eps) {
                *best = best.max(entropy_of(&q));
            }
            return;
        }
        for c in 0..=left {
            counts[i] = c;
            rec(i + 1, left - c, counts, steps, u, eps, best);
        }
    }
    rec(0, steps, &mut counts, steps, u, eps, &mut best);
    best
}

/// A `lambda > 0` such that every `k`-atom distribution with entropy above
/// `log k - lambda` has all atoms strictly within `eps` of `1/k`.
///
/// Valid for `0 < eps <= 1 - 1/k`.
pub fn uniformity_bound(k: usize, eps: f64) -> Result<f64> {
    if k < 2 {
        return invalid(format!("uniformity bound needs k >= 2, got {k}"));
    }
    let upper = 1.0 - 1.0 / k as f64;
    if !(eps > 0.0) || eps > upper + 1e-15 {
        return invalid(format!("eps = {eps} must lie in (0, {upper}]"));
    }
    let mut h_max = constrained_max_entropy(k, eps);
    if k <= 4 {
        // Grid points sit at distance >= eps, so they can only confirm the family.
        let grid = grid_max_entropy(k, eps, GRID_STEPS);
        if grid > h_max {
            h_max = grid;
        }
    }
    Ok((k as f64).ln() - h_max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::rng::Rng64;

    #[test]
    fn boundary_case_two_atoms() {
        let lambda = uniformity_bound(2, 0.5).unwrap();
        assert!((lambda - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn two_atoms_tenth() {
        // Grid oracle over two-atom distributions (p, 1-p) with |p - 1/2| >= 0.1.
        let mut best = f64::NEG_INFINITY;
        for i in 0..=100_000 {
            let p = i as f64 / 100_000.0;
            if (p - 0.5).abs() >= 0.1 - 1e-12 {
                best = best.max(entropy_of(&[p, 1.0 - p]));
            }
        }
        let oracle = 2f64.ln() - best;
        let lambda = uniformity_bound(2, 0.1).unwrap();
        assert!((lambda - oracle).abs() < 1e-9);
        assert!((lambda - 0.020136).abs() < 1e-6);
    }

    #[test]
    fn grid_never_beats_family() {
        for k in 2..=4 {
            for eps in [0.02, 0.05, 0.1, 0.2] {
                let fam = constrained_max_entropy(k, eps);
                let grid = grid_max_entropy(k, eps, 60);
                assert!(grid <= fam + 1e-12, "k={k} eps={eps}");
            }
        }
    }

    /// Random point of the simplex, perturbed from uniform at a random scale so
    /// that high-entropy distributions are well represented.
    fn near_uniform(rng: &mut Rng64, k: usize) -> Vec<f64> {
        let scale = rng.next_f64().powi(3);
        let raw: Vec<f64> = (0..k)
            .map(|_| 1.0 + scale * k as f64 * (rng.next_f64() - 0.5))
            .map(|x| x.max(0.0))
            .collect();
        let s: f64 = raw.iter().sum();
        raw.iter().map(|x| x / s).collect()
    }

    #[test]
    fn rejection_sampling() {
        let mut rng = Rng64::new(7);
        for (k, eps) in [(4usize, 0.05), (3, 0.1), (5, 0.05)] {
            let lambda = uniformity_bound(k, eps).unwrap();
            assert!(lambda > 0.0);
            let threshold = (k as f64).ln() - lambda;
            for _ in 0..10_000 {
                let q = near_uniform(&mut rng, k);
                if entropy_of(&q) > threshold {
                    let u = 1.0 / k as f64;
                    assert!(q.iter().all(|x| (x - u).abs() < eps));
                }
            }
        }
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(uniformity_bound(1, 0.1).is_err());
        assert!(uniformity_bound(2, 0.0).is_err());
        assert!(uniformity_bound(2, 0.6).is_err());
        assert!(uniformity_bound(4, 0.8).is_err());
    }
}
