//! Empirical testers for measure-theoretic sensitivity.
//!
//! A trial places `n` distinct points in a target set `A`, follows their
//! orbits for `N` steps, and records the times `F` at which the points sit in
//! pairwise distinct atoms. Densities of `F` are reported through the
//! finite-window proxies of [`crate::num::density_estimate`]. A missing
//! witness is reported as "not witnessed at budget", never as a proof of
//! non-sensitivity.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::num::{default_checkpoints, density_estimate, DensityEstimate, FiniteTimeSet};
use crate::partitions::{Partition, TimePattern};
use crate::pattern::p_star_with_budget;
use crate::systems::rng::derive_seed;
use crate::systems::{Phase, Point, System, SystemSpec};

/// Smallest rejection budget for sampling inside a target set.
pub const MIN_REJECTION_BUDGET: usize = 1000;
/// Symbols generated per candidate while rejection sampling; longer prefixes
/// are regenerated from the seed on demand.
const SAMPLE_HORIZON: usize = 128;

/// A set of positive measure to draw witnesses from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetSpec {
    FullSpace,
    /// Points reading `word` at coordinates `position..position + |word|`.
    Cylinder { word: Vec<u8>, position: usize },
    /// Points whose circle coordinate lies in `[start, start + length)`.
    Arc { start: Phase, length: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetSet {
    pub spec: TargetSpec,
    pub measure: f64,
}

impl TargetSet {
    pub fn new(sys: &System, spec: TargetSpec) -> Result<Self> {
        let measure = match &spec {
            TargetSpec::FullSpace => 1.0,
            TargetSpec::Cylinder { word, .. } => sys.word_frequency(word)?,
            TargetSpec::Arc { length, .. } => {
                if sys.rotation_number().is_none() {
                    return Err(Error::Kind {
                        op: "arc target",
                        kind: sys.kind_name(),
                    });
                }
                if !(*length > 0.0 && *length < 1.0) {
                    return invalid("arc length must lie in (0, 1)");
                }
                *length
            }
        };
        if !(measure > 0.0) {
            return invalid("target set has measure zero");
        }
        Ok(Self { spec, measure })
    }

    pub fn contains(&self, sys: &System, x: &Point) -> Result<bool> {
        Ok(match &self.spec {
            TargetSpec::FullSpace => true,
            TargetSpec::Cylinder { word, position } => {
                let s = sys.symbols(x, position + word.len())?;
                s[*position..] == word[..]
            }
            TargetSpec::Arc { start, length } => {
                let z = x.phase().ok_or_else(|| Error::Kind {
                    op: "arc target",
                    kind: sys.kind_name(),
                })?;
                z.minus(*start).0 < Phase::from_f64(*length).0
            }
        })
    }

    fn rejection_budget(&self, n: usize) -> usize {
        let expected = (self.measure.powi(n as i32)).recip() * 50.0;
        (expected.min(1e8) as usize).max(MIN_REJECTION_BUDGET)
    }
}

/// How a witness point was obtained: sampled with `seed`, then moved `shift` steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct WitnessSource {
    pub seed: u64,
    pub shift: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparationRecord {
    pub witnesses: Vec<WitnessSource>,
    #[serde(skip)]
    pub separation_set: FiniteTimeSet,
    pub separation_count: usize,
    pub density: DensityEstimate,
    /// `|F| / N`.
    pub all_distinct_atoms_fraction: f64,
}

/// Times `k < window` at which the atoms of the given orbits are pairwise distinct.
pub fn separation_set(atom_sequences: &[Vec<u32>], window: usize) -> FiniteTimeSet {
    let mut seen: Vec<u32> = Vec::with_capacity(atom_sequences.len());
    FiniteTimeSet::from_predicate(window, |k| {
        seen.clear();
        for s in atom_sequences {
            if seen.contains(&s[k]) {
                return false;
            }
            seen.push(s[k]);
        }
        true
    })
}

/// Separation record of explicit points over the window `[0, window)`.
pub fn separation_for_points(
    sys: &System,
    part: &Partition,
    points: &[Point],
    witnesses: Vec<WitnessSource>,
    window: usize,
) -> Result<SeparationRecord> {
    if window == 0 {
        return invalid("observation window must be positive");
    }
    let seqs: Vec<Vec<u32>> = points
        .iter()
        .map(|x| part.orbit_atom_sequence(sys, x, window))
        .collect::<Result<_>>()?;
    let f = separation_set(&seqs, window);
    let density = density_estimate(&f, &default_checkpoints(window))?;
    Ok(SeparationRecord {
        witnesses,
        separation_count: f.len(),
        all_distinct_atoms_fraction: f.len() as f64 / window as f64,
        separation_set: f,
        density,
    })
}

/// Rejection-samples `n` pairwise distinct points of `target`.
pub fn sample_in_target(
    sys: &System,
    target: &TargetSet,
    n: usize,
    seed: u64,
) -> Result<(Vec<Point>, Vec<WitnessSource>)> {
    let budget = target.rejection_budget(1);
    let mut points: Vec<Point> = Vec::with_capacity(n);
    let mut sources = Vec::with_capacity(n);
    let mut attempt = 0u64;
    while points.len() < n {
        if attempt as usize >= budget * n {
            return Err(Error::Sampling {
                budget: budget * n,
                what: format!("{n} distinct points in a set of measure {:.3e}", target.measure),
            });
        }
        let s = derive_seed(seed, attempt);
        attempt += 1;
        let x = sys.sample_point(s, SAMPLE_HORIZON)?;
        if !target.contains(sys, &x)? {
            continue;
        }
        let mut fresh = true;
        for p in &points {
            if !sys.distinct(p, &x)? {
                fresh = false;
                break;
            }
        }
        if fresh {
            points.push(x);
            sources.push(WitnessSource { seed: s, shift: 0 });
        }
    }
    Ok((points, sources))
}

fn check_atoms(part: &Partition, n: usize) -> Result<()> {
    if n < 2 {
        return invalid("n must be at least 2");
    }
    if part.atom_count() < n {
        return Err(Error::Precondition(format!(
            "partition has {} atoms, fewer than n = {n}",
            part.atom_count()
        )));
    }
    Ok(())
}

/// One n-sensitivity trial: `n` random distinct points of `A` and their separation set.
pub fn n_sensitivity_trial(
    sys: &System,
    part: &Partition,
    target: &TargetSet,
    n: usize,
    window: usize,
    seed: u64,
) -> Result<SeparationRecord> {
    check_atoms(part, n)?;
    let (points, sources) = sample_in_target(sys, target, n, seed)?;
    separation_for_points(sys, part, &points, sources, window)
}

/// Same data as [`n_sensitivity_trial`]; weak sensitivity reads the upper proxy.
pub fn weak_sensitivity_trial(
    sys: &System,
    part: &Partition,
    target: &TargetSet,
    n: usize,
    window: usize,
    seed: u64,
) -> Result<SeparationRecord> {
    n_sensitivity_trial(sys, part, target, n, window, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Construction {
    Found {
        pattern: TimePattern,
        pattern_entropy: f64,
        witnesses: Vec<WitnessSource>,
        #[serde(skip)]
        points: Vec<Point>,
        samples_used: usize,
    },
    NotWitnessed {
        reason: String,
    },
}

/// Builds witnesses from a high-entropy pattern: find `t_1 < ... < t_n` by
/// [`p_star_with_budget`], sample `z` until every `T^{t_i} z` lies in `A`,
/// and return `x_i = T^{t_i} z`. The `x_i` then sit in distinct atoms at
/// time `k` whenever `T^k z` falls in a cell of the pattern join that
/// assigns distinct atoms to the pattern times.
#[allow(clippy::too_many_arguments)]
pub fn construct_witnesses(
    sys: &System,
    part: &Partition,
    target: &TargetSet,
    n: usize,
    horizon: usize,
    seed: u64,
    node_budget: u64,
    sample_budget: usize,
) -> Result<Construction> {
    if part.atom_count() < n {
        return Ok(Construction::NotWitnessed {
            reason: format!("partition has {} atoms, fewer than n = {n}", part.atom_count()),
        });
    }
    if n < 2 {
        return invalid("n must be at least 2");
    }
    let search = p_star_with_budget(sys, part, n, horizon, node_budget)?;
    let times = search.best_pattern.times().to_vec();
    let need = SAMPLE_HORIZON.max(times.last().unwrap() + SAMPLE_HORIZON);
    for attempt in 0..sample_budget {
        let s = derive_seed(seed, attempt as u64);
        let z = sys.sample_point(s, need)?;
        let mut points = Vec::with_capacity(n);
        let mut inside = true;
        for &t in &times {
            let x = sys.shift(&z, t)?;
            if !target.contains(sys, &x)? {
                inside = false;
                break;
            }
            points.push(x);
        }
        if !inside {
            continue;
        }
        let mut distinct = true;
        'pairs: for i in 0..n {
            for j in i + 1..n {
                if !sys.distinct(&points[i], &points[j])? {
                    distinct = false;
                    break 'pairs;
                }
            }
        }
        if distinct {
            return Ok(Construction::Found {
                pattern_entropy: search.best_value,
                pattern: search.best_pattern,
                witnesses: times.iter().map(|&t| WitnessSource { seed: s, shift: t }).collect(),
                points,
                samples_used: attempt + 1,
            });
        }
    }
    Ok(Construction::NotWitnessed {
        reason: format!("no sample of {sample_budget} put every pattern time in the target"),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Notion {
    Strong,
    Weak,
    Mean,
    Pair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Witnessed,
    NotWitnessedAtBudget,
}

impl Verdict {
    fn from_delta(delta: f64) -> Self {
        if delta > 0.0 {
            Verdict::Witnessed
        } else {
            Verdict::NotWitnessedAtBudget
        }
    }
}

/// Cesàro averages of the minimum pairwise orbit distance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanRecord {
    pub witnesses: Vec<WitnessSource>,
    /// `(N', (1/N') sum_{k<N'} min_{i<j} d(T^k x_i, T^k x_j))` per checkpoint.
    pub profile: Vec<(usize, f64)>,
    pub lower_proxy: f64,
    pub upper_proxy: f64,
    /// Terms where two symbolic orbits agreed on the whole metric horizon.
    pub unresolved_terms: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityReport {
    pub notion: Notion,
    pub n: usize,
    pub window: usize,
    /// Largest proxy over trials: the lower proxy for strong, pair and mean
    /// notions, the upper proxy for weak.
    pub delta_estimate: f64,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub trials: Vec<SeparationRecord>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub mean_trials: Vec<MeanRecord>,
}

fn proxy(notion: Notion, d: &DensityEstimate) -> f64 {
    match notion {
        Notion::Weak => d.upper_proxy,
        _ => d.lower_proxy,
    }
}

/// Cesàro profile of explicit points at the default checkpoints of `window`.
pub fn cesaro_profile(sys: &System, points: &[Point], window: usize) -> Result<(Vec<(usize, f64)>, usize)> {
    if points.len() < 2 {
        return invalid("need at least two points");
    }
    if window == 0 {
        return invalid("observation window must be positive");
    }
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if !sys.distinct(&points[i], &points[j])? {
                return invalid("witness points must be distinct");
            }
        }
    }
    let mut min_d = vec![f64::INFINITY; window];
    let mut unresolved = vec![false; window];
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            for (k, d) in sys.distance_profile(&points[i], &points[j], window)?.into_iter().enumerate() {
                if d.value < min_d[k] {
                    min_d[k] = d.value;
                }
                unresolved[k] |= !d.resolved;
            }
        }
    }
    let checkpoints = default_checkpoints(window);
    let mut profile = Vec::with_capacity(checkpoints.len());
    // Kahan summation keeps long averages of constant terms exact.
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    let mut next = 0;
    for (k, &d) in min_d.iter().enumerate() {
        let y = d - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        if k + 1 == checkpoints[next] {
            profile.push((k + 1, sum / (k + 1) as f64));
            next += 1;
        }
    }
    Ok((profile, unresolved.iter().filter(|&&u| u).count()))
}

/// Mean n-sensitivity: `trials` independent draws of `n` distinct points in `A`.
pub fn mean_sensitivity_estimate(
    sys: &System,
    target: &TargetSet,
    n: usize,
    window: usize,
    trials: usize,
    seed: u64,
) -> Result<SensitivityReport> {
    if n < 2 || trials == 0 {
        return invalid("need n >= 2 and at least one trial");
    }
    let mean_trials: Vec<MeanRecord> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let (points, witnesses) = sample_in_target(sys, target, n, derive_seed(seed, t as u64))?;
            let (profile, unresolved_terms) = cesaro_profile(sys, &points, window)?;
            let suffix = &profile[profile.len() / 2..];
            Ok(MeanRecord {
                witnesses,
                lower_proxy: suffix.iter().map(|p| p.1).fold(f64::INFINITY, f64::min),
                upper_proxy: suffix.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max),
                profile,
                unresolved_terms,
            })
        })
        .collect::<Result<_>>()?;
    let delta = mean_trials.iter().map(|r| r.lower_proxy).fold(0.0, f64::max);
    Ok(SensitivityReport {
        notion: Notion::Mean,
        n,
        window,
        delta_estimate: delta,
        verdict: Verdict::from_delta(delta),
        trials: Vec::new(),
        mean_trials,
    })
}

/// Separation densities of independent pairs drawn from the whole space.
pub fn pair_separation_density(
    sys: &System,
    part: &Partition,
    trials: usize,
    window: usize,
    seed: u64,
) -> Result<SensitivityReport> {
    if trials == 0 {
        return invalid("need at least one trial");
    }
    let records: Vec<SeparationRecord> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let seeds = [derive_seed(seed, 2 * t as u64), derive_seed(seed, 2 * t as u64 + 1)];
            let points = seeds
                .iter()
                .map(|&s| sys.sample_point(s, SAMPLE_HORIZON))
                .collect::<Result<Vec<_>>>()?;
            let witnesses = seeds.iter().map(|&s| WitnessSource { seed: s, shift: 0 }).collect();
            separation_for_points(sys, part, &points, witnesses, window)
        })
        .collect::<Result<_>>()?;
    Ok(report(Notion::Pair, 2, window, records))
}

fn report(notion: Notion, n: usize, window: usize, trials: Vec<SeparationRecord>) -> SensitivityReport {
    let delta = trials.iter().map(|r| proxy(notion, &r.density)).fold(0.0, f64::max);
    SensitivityReport {
        notion,
        n,
        window,
        delta_estimate: delta,
        verdict: Verdict::from_delta(delta),
        trials,
        mean_trials: Vec::new(),
    }
}

/// Strong or weak trials on a single target set.
#[allow(clippy::too_many_arguments)]
pub fn sensitivity_trials(
    sys: &System,
    part: &Partition,
    target: &TargetSet,
    notion: Notion,
    n: usize,
    window: usize,
    trials: usize,
    seed: u64,
) -> Result<SensitivityReport> {
    if !matches!(notion, Notion::Strong | Notion::Weak) {
        return invalid("separation trials support the strong and weak notions");
    }
    check_atoms(part, n)?;
    if trials == 0 {
        return invalid("need at least one trial");
    }
    let records: Vec<SeparationRecord> = (0..trials)
        .into_par_iter()
        .map(|t| n_sensitivity_trial(sys, part, target, n, window, derive_seed(seed, t as u64)))
        .collect::<Result<_>>()?;
    Ok(report(notion, n, window, records))
}

/// Shrinking target sets: cylinders of the prefixes (lengths `1..=levels`) of
/// a seeded reference point for symbolic systems, arcs `[0, 2^-j)` for
/// circle systems, and the whole space otherwise.
pub fn adversarial_family(sys: &System, levels: usize, seed: u64) -> Result<Vec<TargetSet>> {
    if sys.is_symbolic() {
        let x = sys.sample_point(seed, levels.max(1))?;
        let prefix = sys.symbols(&x, levels)?.into_owned();
        (1..=levels)
            .map(|l| {
                TargetSet::new(
                    sys,
                    TargetSpec::Cylinder {
                        word: prefix[..l].to_vec(),
                        position: 0,
                    },
                )
            })
            .collect()
    } else if matches!(sys.spec(), SystemSpec::Rotation { .. } | SystemSpec::FiniteExtension { .. }) {
        (1..=levels)
            .map(|j| {
                TargetSet::new(
                    sys,
                    TargetSpec::Arc {
                        start: Phase::ZERO,
                        length: 0.5f64.powi(j as i32),
                    },
                )
            })
            .collect()
    } else {
        Ok(vec![TargetSet::new(sys, TargetSpec::FullSpace)?])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry {
    pub target: TargetSet,
    pub report: SensitivityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivitySweep {
    pub notion: Notion,
    pub n: usize,
    /// Smallest per-set estimate over the family.
    pub delta_estimate: f64,
    pub verdict: Verdict,
    pub per_set: Vec<SweepEntry>,
}

/// Runs [`sensitivity_trials`] on every target and takes the minimum estimate.
#[allow(clippy::too_many_arguments)]
pub fn sensitivity_sweep(
    sys: &System,
    part: &Partition,
    family: &[TargetSet],
    notion: Notion,
    n: usize,
    window: usize,
    trials: usize,
    seed: u64,
) -> Result<SensitivitySweep> {
    if family.is_empty() {
        return invalid("empty target family");
    }
    let per_set: Vec<SweepEntry> = family
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let report = sensitivity_trials(sys, part, a, notion, n, window, trials, derive_seed(seed, i as u64))?;
            Ok(SweepEntry {
                target: a.clone(),
                report,
            })
        })
        .collect::<Result<_>>()?;
    let delta = per_set
        .iter()
        .map(|e| e.report.delta_estimate)
        .fold(f64::INFINITY, f64::min);
    Ok(SensitivitySweep {
        notion,
        n,
        delta_estimate: delta,
        verdict: Verdict::from_delta(delta),
        per_set,
    })
}
