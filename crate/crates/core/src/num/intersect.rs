use fixedbitset::FixedBitSet;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::num::prob::PROB_TOL;

/// Lists up to this length are searched exhaustively.
pub const EXHAUSTIVE_LIMIT: usize = 20;
const BEAM_WIDTH: usize = 64;

/// A probability space on finitely many points.
#[derive(Debug, Clone)]
pub struct FiniteSpace {
    weights: Vec<f64>,
    uniform: bool,
}

impl FiniteSpace {
    pub fn uniform(size: usize) -> Self {
        Self {
            weights: vec![1.0 / size as f64; size],
            uniform: true,
        }
    }

    pub fn weighted(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return invalid("point weights must be non-negative");
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > PROB_TOL {
            return invalid(format!("point weights sum to {s}"));
        }
        Ok(Self {
            weights,
            uniform: false,
        })
    }

    pub fn size(&self) -> usize {
        self.weights.len()
    }

    pub fn measure(&self, set: &FixedBitSet) -> f64 {
        if self.uniform {
            set.count_ones(..) as f64 / self.size() as f64
        } else {
            set.ones().map(|i| self.weights[i]).sum()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntersectionChoice {
    /// Increasing indices into the input list.
    pub indices: Vec<usize>,
    pub measure: f64,
    /// `false` when the beam heuristic was used.
    pub exhaustive: bool,
}

/// Chooses `k` of the `sets` whose common intersection has the largest measure.
///
/// Exhaustive up to [`EXHAUSTIVE_LIMIT`] sets, beam search beyond.
pub fn best_k_intersection(
    space: &FiniteSpace,
    sets: &[FixedBitSet],
    k: usize,
) -> Result<IntersectionChoice> {
    if k == 0 {
        return invalid("k must be at least 1");
    }
    if k > sets.len() {
        return invalid(format!("k = {k} exceeds the {} sets given", sets.len()));
    }
    if let Some(s) = sets.iter().find(|s| s.len() != space.size()) {
        return invalid(format!(
            "set over {} points in a space of {} points",
            s.len(),
            space.size()
        ));
    }
    if sets.len() <= EXHAUSTIVE_LIMIT {
        Ok(exhaustive(space, sets, k))
    } else {
        Ok(beam(space, sets, k))
    }
}

fn exhaustive(space: &FiniteSpace, sets: &[FixedBitSet], k: usize) -> IntersectionChoice {
    let mut best = IntersectionChoice {
        indices: Vec::new(),
        measure: f64::NEG_INFINITY,
        exhaustive: true,
    };
    let mut chosen = Vec::with_capacity(k);
    let mut stack: Vec<FixedBitSet> = Vec::with_capacity(k);
    fn rec(
        space: &FiniteSpace,
        sets: &[FixedBitSet],
        k: usize,
        start: usize,
        chosen: &mut Vec<usize>,
        stack: &mut Vec<FixedBitSet>,
        best: &mut IntersectionChoice,
    ) {
        if chosen.len() == k {
            let m = space.measure(stack.last().unwrap());
            if m > best.measure {
                best.measure = m;
                best.indices = chosen.clone();
            }
            return;
        }
        let remaining = k - chosen.len();
        for i in start..=sets.len() - remaining {
            let mut cur = sets[i].clone();
            if let Some(top) = stack.last() {
                cur.intersect_with(top);
            }
            // Measure only shrinks as more sets are added.
            if space.measure(&cur) <= best.measure {
                continue;
            }
            chosen.push(i);
            stack.push(cur);
            rec(space, sets, k, i + 1, chosen, stack, best);
            stack.pop();
            chosen.pop();
        }
    }
    rec(space, sets, k, 0, &mut chosen, &mut stack, &mut best);
    best
}

fn beam(space: &FiniteSpace, sets: &[FixedBitSet], k: usize) -> IntersectionChoice {
    // (indices, intersection, measure)
    let mut frontier: Vec<(Vec<usize>, FixedBitSet, f64)> = vec![(
        Vec::new(),
        {
            let mut all = FixedBitSet::with_capacity(space.size());
            all.insert_range(..);
            all
        },
        1.0,
    )];
    for _ in 0..k {
        let mut next: Vec<(Vec<usize>, FixedBitSet, f64)> = Vec::new();
        for (idx, inter, _) in &frontier {
            let start = idx.last().map_or(0, |l| l + 1);
            for (i, s) in sets.iter().enumerate().skip(start) {
                let mut cur = inter.clone();
                cur.intersect_with(s);
                let m = space.measure(&cur);
                let mut ni = idx.clone();
                ni.push(i);
                next.push((ni, cur, m));
            }
        }
        next.sort_by(|a, b| b.2.total_cmp(&a.2).then_with(|| a.0.cmp(&b.0)));
        next.truncate(BEAM_WIDTH);
        frontier = next;
    }
    let (indices, _, measure) = frontier.swap_remove(0);
    IntersectionChoice {
        indices,
        measure,
        exhaustive: false,
    }
}
