//! Maximal pattern entropy.
//!
//! [`p_star`] maximizes the join entropy `H(T^{-t_1} ξ ∨ ... ∨ T^{-t_k} ξ)`
//! over patterns `t_1 < ... < t_k` inside `[0, T]`. Results are lower bounds
//! for the unrestricted supremum and always carry the horizon `T`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::num::entropy_term;
use crate::partitions::{
    joint_distribution, partition_entropy, CellTable, Partition, PartitionSpec, TimePattern,
};
use crate::systems::System;

/// Default cap on search-tree node expansions.
pub const DEFAULT_NODE_BUDGET: u64 = 10_000_000;
/// Largest cell table (cells times columns) kept in memory for the search.
const TABLE_LIMIT: f64 = (1u64 << 24) as f64;
/// Entropies closer than this count as equal.
pub const TIE_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatternSearchResult {
    pub k: usize,
    pub horizon: usize,
    /// Nats.
    pub best_value: f64,
    pub best_pattern: TimePattern,
    pub nodes_expanded: u64,
    /// `false` when the node budget ran out before the search finished.
    pub exact_within_horizon: bool,
}

/// Incremental join entropy along a growing pattern.
trait Evaluator {
    /// Appends time `t` and returns the entropy of the extended join.
    fn push(&mut self, t: usize) -> Result<f64>;
    fn pop(&mut self);
}

/// Refines cell classes one column at a time.
struct TableEval<'a> {
    table: &'a CellTable,
    atoms: usize,
    /// `levels[d]` holds the class of every cell after `d` times.
    levels: Vec<Vec<u32>>,
    counts: Vec<usize>,
    depth: usize,
    map: Vec<u32>,
    mass: Vec<f64>,
}

impl<'a> TableEval<'a> {
    fn new(table: &'a CellTable, atoms: usize, k: usize) -> Self {
        let n = table.cells();
        Self {
            table,
            atoms,
            levels: vec![vec![0; n]; k + 1],
            counts: {
                let mut c = vec![0; k + 1];
                c[0] = 1;
                c
            },
            depth: 0,
            map: Vec::new(),
            mass: Vec::new(),
        }
    }
}

impl Evaluator for TableEval<'_> {
    fn push(&mut self, t: usize) -> Result<f64> {
        // Times of a full-horizon table are 0..=T, so the column is the time.
        let col = self.table.column(t);
        let (prev, rest) = self.levels.split_at_mut(self.depth + 1);
        let prev = &prev[self.depth];
        let next = &mut rest[0];
        let keys = self.counts[self.depth] * self.atoms;
        if self.map.len() < keys {
            self.map.resize(keys, u32::MAX);
        }
        self.mass.clear();
        let masses = self.table.masses();
        for c in 0..prev.len() {
            let key = prev[c] as usize * self.atoms + col[c] as usize;
            let mut id = self.map[key];
            if id == u32::MAX {
                id = self.mass.len() as u32;
                self.map[key] = id;
                self.mass.push(0.0);
            }
            next[c] = id;
            self.mass[id as usize] += masses[c];
        }
        for c in 0..prev.len() {
            self.map[prev[c] as usize * self.atoms + col[c] as usize] = u32::MAX;
        }
        self.depth += 1;
        self.counts[self.depth] = self.mass.len();
        Ok(self.mass.iter().map(|&m| entropy_term(m)).sum())
    }

    fn pop(&mut self) {
        self.depth -= 1;
    }
}

/// Recomputes the joint law from scratch at every node.
struct DirectEval<'a> {
    sys: &'a System,
    part: &'a Partition,
    times: Vec<usize>,
}

impl Evaluator for DirectEval<'_> {
    fn push(&mut self, t: usize) -> Result<f64> {
        self.times.push(t);
        let pat = TimePattern::new(self.times.clone())?;
        Ok(joint_distribution(self.sys, self.part, &pat)?.entropy())
    }

    fn pop(&mut self) {
        self.times.pop();
    }
}

/// A cell table over `0..=horizon` when it fits in memory.
fn full_table(sys: &System, part: &Partition, horizon: usize) -> Result<Option<CellTable>> {
    let times: Vec<usize> = (0..=horizon).collect();
    let est = match CellTable::estimate_cells(sys, part, &times) {
        Ok(e) => e,
        Err(crate::Error::Span { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    if est * (horizon + 1) as f64 > TABLE_LIMIT {
        return Ok(None);
    }
    Ok(Some(CellTable::build(sys, part, &times)?))
}

fn check_args(k: usize, horizon: usize) -> Result<()> {
    if k == 0 {
        return invalid("k must be at least 1");
    }
    if horizon + 1 < k {
        return invalid(format!("horizon {horizon} cannot hold {k} distinct times"));
    }
    Ok(())
}

/// `p*_T(k)`: the largest join entropy over `k`-patterns in `[0, horizon]`,
/// with the default node budget.
pub fn p_star(sys: &System, part: &Partition, k: usize, horizon: usize) -> Result<PatternSearchResult> {
    p_star_with_budget(sys, part, k, horizon, DEFAULT_NODE_BUDGET)
}

pub fn p_star_with_budget(
    sys: &System,
    part: &Partition,
    k: usize,
    horizon: usize,
    budget: u64,
) -> Result<PatternSearchResult> {
    check_args(k, horizon)?;
    let table = full_table(sys, part, horizon)?;
    run_search(sys, part, table.as_ref(), k, horizon, budget)
}

fn run_search(
    sys: &System,
    part: &Partition,
    table: Option<&CellTable>,
    k: usize,
    horizon: usize,
    budget: u64,
) -> Result<PatternSearchResult> {
    let mut ev: Box<dyn Evaluator + '_> = match table {
        Some(t) => Box::new(TableEval::new(t, part.atom_count(), k)),
        None => Box::new(DirectEval {
            sys,
            part,
            times: Vec::new(),
        }),
    };
    Search {
        ev: ev.as_mut(),
        k,
        horizon,
        h_xi: partition_entropy(part),
        budget,
    }
    .run()
}

struct Search<'e> {
    ev: &'e mut dyn Evaluator,
    k: usize,
    horizon: usize,
    h_xi: f64,
    budget: u64,
}

struct State {
    nodes: u64,
    complete: bool,
    floor: f64,
    best: f64,
    best_pattern: Vec<usize>,
    current: Vec<usize>,
}

impl Search<'_> {
    /// Depth-first in lexicographic order with `t_1 = 0` (shift invariance).
    /// A node is cut when `H(S) + (k - |S|) H(ξ)` cannot beat the incumbent,
    /// so the first optimum reached is the lexicographically smallest one.
    fn run(mut self) -> Result<PatternSearchResult> {
        let k = self.k;
        // Evenly spread pattern as a pruning floor; it is revisited by the DFS.
        let seed: Vec<usize> = if k == 1 {
            vec![0]
        } else {
            let step = self.horizon / (k - 1);
            (0..k).map(|i| i * step).collect()
        };
        let mut floor = 0.0;
        for &t in &seed {
            floor = self.ev.push(t)?;
        }
        for _ in &seed {
            self.ev.pop();
        }
        let mut st = State {
            nodes: k as u64,
            complete: true,
            floor,
            best: f64::NEG_INFINITY,
            best_pattern: Vec::new(),
            current: Vec::with_capacity(k),
        };
        let h0 = self.ev.push(0)?;
        st.nodes += 1;
        st.current.push(0);
        if k == 1 {
            st.best = h0;
            st.best_pattern = vec![0];
        } else {
            self.dfs(&mut st, h0)?;
        }
        self.ev.pop();
        if st.best < st.floor - TIE_TOL || st.best_pattern.is_empty() {
            st.best = st.floor;
            st.best_pattern = seed;
        }
        Ok(PatternSearchResult {
            k,
            horizon: self.horizon,
            best_value: st.best,
            best_pattern: TimePattern::new(st.best_pattern)?,
            nodes_expanded: st.nodes,
            exact_within_horizon: st.complete,
        })
    }

    /// Expands the node `st.current`, whose join has entropy `h_s`.
    ///
    /// Entropy of joins is submodular, so for the remaining times `R`,
    /// `H(S ∪ {t} ∪ R) <= H(S ∪ {t}) + sum_{r in R} (H(S ∪ {r}) - H(S))`.
    /// The increments are computed once per node and bound every child.
    fn dfs(&mut self, st: &mut State, h_s: f64) -> Result<()> {
        let j = st.current.len();
        let last = *st.current.last().unwrap();
        let m = self.k - j - 1;
        let hi = self.horizon - m;
        let upto = if m == 0 { hi } else { self.horizon };
        let mut h = Vec::with_capacity(upto - last);
        for r in last + 1..=upto {
            if st.nodes >= self.budget {
                st.complete = false;
                return Ok(());
            }
            st.nodes += 1;
            h.push(self.ev.push(r)?);
            self.ev.pop();
        }
        if m == 0 {
            for (i, &v) in h.iter().enumerate() {
                if v > st.best + TIE_TOL {
                    st.best = v;
                    st.best_pattern = st.current.clone();
                    st.best_pattern.push(last + 1 + i);
                }
            }
            return Ok(());
        }
        // suffix[i]: sum of the m largest increments among candidates after index i.
        let mut suffix = vec![0.0; h.len()];
        let mut top: Vec<f64> = Vec::with_capacity(m + 1);
        for i in (0..h.len()).rev() {
            suffix[i] = top.iter().sum();
            let inc = (h[i] - h_s).clamp(0.0, self.h_xi);
            let pos = top.partition_point(|&x| x >= inc);
            if pos < m {
                top.insert(pos, inc);
                top.truncate(m);
            }
        }
        for t in last + 1..=hi {
            let i = t - last - 1;
            let bound = h[i] + suffix[i];
            if bound <= st.best + TIE_TOL || bound < st.floor - TIE_TOL {
                continue;
            }
            if st.nodes >= self.budget {
                st.complete = false;
                return Ok(());
            }
            st.nodes += 1;
            let v = self.ev.push(t)?;
            st.current.push(t);
            self.dfs(st, v)?;
            st.current.pop();
            self.ev.pop();
            if !st.complete {
                return Ok(());
            }
        }
        Ok(())
    }
}

/// Largest number of positive-mass atoms of a `k`-pattern join in `[0, horizon]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomCountResult {
    pub k: usize,
    pub horizon: usize,
    pub max_atoms: usize,
    pub pattern: TimePattern,
    pub patterns_checked: u64,
}

/// Exhaustive over all patterns with `t_1 = 0` (shift invariance covers the rest).
pub fn max_join_atoms(sys: &System, part: &Partition, k: usize, horizon: usize) -> Result<AtomCountResult> {
    check_args(k, horizon)?;
    let Some(table) = full_table(sys, part, horizon)? else {
        return Err(crate::Error::Precondition(format!(
            "cell table over horizon {horizon} is too large for exhaustive atom counting"
        )));
    };
    let mut ev = TableEval::new(&table, part.atom_count(), k);
    let mut best = (0usize, vec![0usize]);
    let mut checked = 0u64;
    let mut current = vec![0usize];
    ev.push(0)?;
    fn rec(
        ev: &mut TableEval,
        k: usize,
        horizon: usize,
        current: &mut Vec<usize>,
        best: &mut (usize, Vec<usize>),
        checked: &mut u64,
    ) -> Result<()> {
        if current.len() == k {
            *checked += 1;
            let atoms = ev.counts[ev.depth];
            if atoms > best.0 {
                *best = (atoms, current.clone());
            }
            return Ok(());
        }
        let last = *current.last().unwrap();
        for t in last + 1..=horizon - (k - current.len() - 1) {
            ev.push(t)?;
            current.push(t);
            rec(ev, k, horizon, current, best, checked)?;
            current.pop();
            ev.pop();
        }
        Ok(())
    }
    rec(&mut ev, k, horizon, &mut current, &mut best, &mut checked)?;
    Ok(AtomCountResult {
        k,
        horizon,
        max_atoms: best.0,
        pattern: TimePattern::new(best.1)?,
        patterns_checked: checked,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileRow {
    pub k: usize,
    pub p_star: f64,
    pub p_star_over_k: f64,
    pub exact: bool,
    pub pattern: TimePattern,
    pub nodes_expanded: u64,
}

/// `p*_T(k)/k` for `k = 1..=k_max` and its minimum, the finite-horizon
/// estimate of `h*(T, ξ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HStarProfile {
    pub partition: PartitionSpec,
    pub horizon: usize,
    pub per_k: Vec<ProfileRow>,
    pub infimum_proxy: f64,
    pub exact: bool,
}

pub fn h_star_profile(
    sys: &System,
    part: &Partition,
    k_max: usize,
    horizon: usize,
    budget: u64,
) -> Result<HStarProfile> {
    check_args(k_max, horizon)?;
    let table = full_table(sys, part, horizon)?;
    let per_k: Vec<ProfileRow> = (1..=k_max)
        .into_par_iter()
        .map(|k| {
            let r = run_search(sys, part, table.as_ref(), k, horizon, budget)?;
            Ok(ProfileRow {
                k,
                p_star: r.best_value,
                p_star_over_k: r.best_value / k as f64,
                exact: r.exact_within_horizon,
                pattern: r.best_pattern,
                nodes_expanded: r.nodes_expanded,
            })
        })
        .collect::<Result<_>>()?;
    let infimum_proxy = per_k
        .iter()
        .map(|r| r.p_star_over_k)
        .fold(f64::INFINITY, f64::min);
    Ok(HStarProfile {
        partition: part.spec().clone(),
        horizon,
        exact: per_k.iter().all(|r| r.exact),
        per_k,
        infimum_proxy,
    })
}

/// Profiles of the word partitions of lengths `1..=l_max`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilySweep {
    pub profiles: Vec<HStarProfile>,
    /// Largest infimum proxy over the family.
    pub sup: f64,
}

/// Sweeps word partitions. The horizon for length `L` is
/// `max(horizon, (k_max - 1) L)`, so `k_max` disjoint windows always fit.
pub fn family_sweep(sys: &System, l_max: usize, k_max: usize, horizon: usize, budget: u64) -> Result<FamilySweep> {
    if l_max == 0 {
        return invalid("family needs at least one word length");
    }
    let mut profiles = Vec::with_capacity(l_max);
    for l in 1..=l_max {
        let part = Partition::resolve(sys, &PartitionSpec::Word { length: l })?;
        let t = horizon.max(k_max.saturating_sub(1) * l);
        profiles.push(h_star_profile(sys, &part, k_max, t, budget)?);
    }
    let sup = profiles.iter().map(|p| p.infimum_proxy).fold(0.0, f64::max);
    Ok(FamilySweep { profiles, sup })
}

/// `H(T^{-γ_1} ξ ∨ ... ∨ T^{-γ_n} ξ) / n` for `n = 1..=gamma.len()`.
pub fn sequence_entropy_profile(sys: &System, part: &Partition, gamma: &[usize]) -> Result<Vec<f64>> {
    let pattern = TimePattern::new(gamma.to_vec())?;
    let est = CellTable::estimate_cells(sys, part, pattern.times())?;
    if est * gamma.len() as f64 <= TABLE_LIMIT {
        let table = CellTable::build(sys, part, pattern.times())?;
        let mut classes = vec![0u32; table.cells()];
        let mut out = Vec::with_capacity(gamma.len());
        let mut map = std::collections::HashMap::new();
        for i in 0..gamma.len() {
            map.clear();
            let col = table.column(i);
            let mut mass: Vec<f64> = Vec::new();
            for c in 0..table.cells() {
                let next = map.len() as u32;
                let id = *map.entry((classes[c], col[c])).or_insert(next);
                if id as usize == mass.len() {
                    mass.push(0.0);
                }
                mass[id as usize] += table.masses()[c];
                classes[c] = id;
            }
            let h: f64 = mass.iter().map(|&m| entropy_term(m)).sum();
            out.push(h / (i + 1) as f64);
        }
        Ok(out)
    } else {
        (1..=gamma.len())
            .map(|n| {
                let p = TimePattern::new(gamma[..n].to_vec())?;
                Ok(joint_distribution(sys, part, &p)?.entropy() / n as f64)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{Phase, SystemSpec};

    fn setup(spec: SystemSpec, p: PartitionSpec) -> (System, Partition) {
        let s = System::new(spec).unwrap();
        let part = Partition::resolve(&s, &p).unwrap();
        (s, part)
    }

    /// Every `k`-subset of `0..=horizon`, scored through `joint_distribution`.
    fn brute_force(sys: &System, part: &Partition, k: usize, horizon: usize) -> (f64, Vec<usize>) {
        let mut best = (f64::NEG_INFINITY, Vec::new());
        let mut cur = Vec::new();
        fn rec(
            sys: &System,
            part: &Partition,
            k: usize,
            horizon: usize,
            start: usize,
            cur: &mut Vec<usize>,
            best: &mut (f64, Vec<usize>),
        ) {
            if cur.len() == k {
                let h = joint_distribution(sys, part, &TimePattern::new(cur.clone()).unwrap())
                    .unwrap()
                    .entropy();
                if h > best.0 + TIE_TOL {
                    *best = (h, cur.clone());
                }
                return;
            }
            for t in start..=horizon {
                cur.push(t);
                rec(sys, part, k, horizon, t + 1, cur, best);
                cur.pop();
            }
        }
        rec(sys, part, k, horizon, 0, &mut cur, &mut best);
        best
    }

    #[test]
    fn bernoulli_every_pattern_optimal() {
        let (s, p) = setup(SystemSpec::bernoulli(&[0.5, 0.5]), PartitionSpec::letters());
        let r = p_star(&s, &p, 5, 16).unwrap();
        assert!((r.best_value - 5.0 * 2f64.ln()).abs() < 1e-10);
        assert_eq!(r.best_pattern.times(), &[0, 1, 2, 3, 4]);
        assert!(r.exact_within_horizon);
    }

    #[test]
    fn k_one_is_partition_entropy() {
        let (s, p) = setup(SystemSpec::thue_morse(), PartitionSpec::Word { length: 2 });
        let r = p_star(&s, &p, 1, 10).unwrap();
        assert!((r.best_value - partition_entropy(&p)).abs() < 1e-12);
        assert_eq!(r.best_pattern.times(), &[0]);
    }

    #[test]
    fn sturmian_bound() {
        let (s, p) = setup(SystemSpec::golden_sturmian(), PartitionSpec::letters());
        let r = p_star(&s, &p, 4, 32).unwrap();
        assert!(r.best_value <= 8f64.ln() + 1e-12);
    }

    #[test]
    fn matches_brute_force_small() {
        let cases = [
            (SystemSpec::thue_morse(), PartitionSpec::letters(), 3, 9),
            (SystemSpec::golden_sturmian(), PartitionSpec::letters(), 3, 10),
            (
                SystemSpec::markov(vec![vec![0.5, 0.5], vec![1.0, 0.0]]),
                PartitionSpec::letters(),
                3,
                7,
            ),
            (SystemSpec::golden_rotation(), PartitionSpec::halves(Phase(1 << 62)), 4, 9),
            (SystemSpec::bernoulli(&[0.2, 0.8]), PartitionSpec::Word { length: 2 }, 2, 6),
        ];
        for (spec, ps, k, t) in cases {
            let (s, p) = setup(spec, ps);
            let r = p_star(&s, &p, k, t).unwrap();
            let (v, pat) = brute_force(&s, &p, k, t);
            assert!((r.best_value - v).abs() <= 1e-12, "{} vs {v}", r.best_value);
            assert_eq!(r.best_pattern.times(), &pat[..]);
        }
    }

    #[test]
    fn atom_counts() {
        let (s, p) = setup(SystemSpec::golden_sturmian(), PartitionSpec::letters());
        let r = max_join_atoms(&s, &p, 3, 12).unwrap();
        assert!(r.max_atoms <= 6);
        assert_eq!(r.patterns_checked, 66);
        let j = joint_distribution(&s, &p, &r.pattern).unwrap();
        assert_eq!(j.dist.len(), r.max_atoms);
    }

    #[test]
    fn budget_exhaustion_is_flagged() {
        let (s, p) = setup(SystemSpec::thue_morse(), PartitionSpec::letters());
        let r = p_star_with_budget(&s, &p, 4, 40, 10).unwrap();
        assert!(!r.exact_within_horizon);
        assert_eq!(r.best_pattern.len(), 4);
    }

    #[test]
    fn direct_and_table_evaluators_agree() {
        let (s, p) = setup(SystemSpec::golden_sturmian(), PartitionSpec::Word { length: 2 });
        let table = full_table(&s, &p, 12).unwrap().unwrap();
        let a = run_search(&s, &p, Some(&table), 3, 12, DEFAULT_NODE_BUDGET).unwrap();
        let b = run_search(&s, &p, None, 3, 12, DEFAULT_NODE_BUDGET).unwrap();
        assert!((a.best_value - b.best_value).abs() < 1e-12);
        assert_eq!(a.best_pattern, b.best_pattern);
    }

    #[test]
    fn profiles() {
        let (s, p) = setup(SystemSpec::bernoulli(&[0.5, 0.5]), PartitionSpec::letters());
        let prof = h_star_profile(&s, &p, 4, 8, DEFAULT_NODE_BUDGET).unwrap();
        assert!((prof.infimum_proxy - 2f64.ln()).abs() < 1e-10);
        let (s, p) = setup(SystemSpec::golden_rotation(), PartitionSpec::Trivial);
        let prof = h_star_profile(&s, &p, 3, 5, DEFAULT_NODE_BUDGET).unwrap();
        assert!(prof.per_k.iter().all(|r| r.p_star == 0.0));
        let seq = sequence_entropy_profile(&s, &p, &[0, 3, 9]).unwrap();
        assert_eq!(seq, vec![0.0; 3]);
    }

    #[test]
    fn sequence_profile_examples() {
        let (s, p) = setup(SystemSpec::bernoulli(&[0.5, 0.5]), PartitionSpec::letters());
        let prof = sequence_entropy_profile(&s, &p, &(0..10).collect::<Vec<_>>()).unwrap();
        assert!(prof.iter().all(|h| (h - 2f64.ln()).abs() < 1e-12));
        let (s, p) = setup(SystemSpec::golden_sturmian(), PartitionSpec::letters());
        let gamma: Vec<usize> = (0..12).map(|i| 3 * i).collect();
        let prof = sequence_entropy_profile(&s, &p, &gamma).unwrap();
        for (i, h) in prof.iter().enumerate() {
            let n = (i + 1) as f64;
            assert!(*h <= (2.0 * n).ln() / n + 1e-12);
        }
        assert!((prof[0] - partition_entropy(&p)).abs() < 1e-12);
    }
}
