//! Concrete measure-preserving systems behind uniform oracles.
//!
//! Symbolic systems (Bernoulli, Markov, substitution, Sturmian coding, and
//! products of these) expose cylinder measures through
//! [`System::word_frequency`]. Circle systems (rotations and finite
//! extensions of rotations) are handled exactly through arc arrangements.
//! Every system can sample points from a seed, move points along the orbit,
//! and measure distances between points.

pub mod circle;
mod markov;
pub mod rng;
mod substitution;

use std::borrow::Cow;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::num::PROB_TOL;
pub use circle::{ArcLabeling, Phase};
pub use markov::MarkovChain;
use rng::{derive_seed, Rng64};
pub use substitution::{FactorTable, Substitution, DEFAULT_MAX_CYCLE, STABILIZATION_TOL};

/// Longest word (or pattern span) handled by the exact symbolic oracles.
pub const DEFAULT_SPAN_LIMIT: usize = 4096;
/// Largest number of cells an exact enumeration may produce.
pub const MAX_CELLS: usize = 1 << 22;
/// Number of coordinates compared by the symbolic metric and distinctness test.
pub const METRIC_HORIZON: usize = 64;

/// Description of a system, as read from a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SystemSpec {
    Bernoulli {
        probs: Vec<f64>,
    },
    Markov {
        transition: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        stationary: Option<Vec<f64>>,
    },
    Substitution {
        #[serde(deserialize_with = "de_rules")]
        rules: Vec<Vec<u8>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_cycle: Option<usize>,
    },
    Sturmian {
        alpha: Phase,
        cut: Phase,
    },
    Rotation {
        alpha: Phase,
    },
    Product {
        components: Vec<SystemSpec>,
    },
    FiniteExtension {
        alpha: Phase,
        fiber: u32,
        cocycle_cuts: Vec<Phase>,
        cocycle_values: Vec<u32>,
    },
}

/// Substitution images may be written as digit strings (`"01"`) or arrays.
fn de_rules<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Vec<Vec<u8>>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Rule {
        Digits(String),
        Letters(Vec<u8>),
    }
    let raw = Vec::<Rule>::deserialize(d)?;
    raw.into_iter()
        .map(|r| match r {
            Rule::Letters(v) => Ok(v),
            Rule::Digits(s) => s
                .chars()
                .map(|c| {
                    c.to_digit(36)
                        .map(|x| x as u8)
                        .ok_or_else(|| serde::de::Error::custom(format!("bad letter `{c}`")))
                })
                .collect(),
        })
        .collect()
}

impl SystemSpec {
    pub fn bernoulli(probs: &[f64]) -> Self {
        SystemSpec::Bernoulli {
            probs: probs.to_vec(),
        }
    }

    pub fn markov(transition: Vec<Vec<f64>>) -> Self {
        SystemSpec::Markov {
            transition,
            stationary: None,
        }
    }

    pub fn thue_morse() -> Self {
        SystemSpec::Substitution {
            rules: vec![vec![0, 1], vec![1, 0]],
            max_cycle: None,
        }
    }

    pub fn golden_rotation() -> Self {
        SystemSpec::Rotation {
            alpha: circle::golden(),
        }
    }

    /// Sturmian coding of the golden rotation with cut point `alpha`.
    pub fn golden_sturmian() -> Self {
        let a = circle::golden();
        SystemSpec::Sturmian { alpha: a, cut: a }
    }

    /// The same system with its alphabet relabelled by `perm` (letter `a`
    /// becomes `perm[a]`).
    pub fn permute_alphabet(&self, perm: &[u8]) -> Result<SystemSpec> {
        let check = |d: usize| -> Result<()> {
            let mut seen = vec![false; d];
            if perm.len() != d || perm.iter().any(|&p| (p as usize) >= d || std::mem::replace(&mut seen[p as usize], true)) {
                return invalid("alphabet permutation is not a bijection");
            }
            Ok(())
        };
        Ok(match self {
            SystemSpec::Bernoulli { probs } => {
                check(probs.len())?;
                let mut p = vec![0.0; probs.len()];
                for (a, &x) in probs.iter().enumerate() {
                    p[perm[a] as usize] = x;
                }
                SystemSpec::Bernoulli { probs: p }
            }
            SystemSpec::Markov { transition, stationary } => {
                check(transition.len())?;
                let m = MarkovChain::new(transition.clone(), stationary.clone())?.permuted(perm)?;
                SystemSpec::Markov {
                    transition: m.transition().to_vec(),
                    stationary: Some(m.stationary().to_vec()),
                }
            }
            SystemSpec::Substitution { rules, max_cycle } => {
                check(rules.len())?;
                let mut r = vec![Vec::new(); rules.len()];
                for a in 0..rules.len() {
                    r[perm[a] as usize] = rules[a].iter().map(|&b| perm[b as usize]).collect();
                }
                SystemSpec::Substitution {
                    rules: r,
                    max_cycle: *max_cycle,
                }
            }
            SystemSpec::Sturmian { alpha, cut } => {
                check(2)?;
                if perm[0] == 0 {
                    self.clone()
                } else {
                    // Swapping the letters is the coding of the rotated circle
                    // `z - c` with cut `1 - c`.
                    SystemSpec::Sturmian {
                        alpha: *alpha,
                        cut: Phase::ZERO.minus(*cut),
                    }
                }
            }
            _ => {
                return Err(Error::Kind {
                    op: "permute_alphabet",
                    kind: self.kind_name(),
                })
            }
        })
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            SystemSpec::Bernoulli { .. } => "bernoulli",
            SystemSpec::Markov { .. } => "markov",
            SystemSpec::Substitution { .. } => "substitution",
            SystemSpec::Sturmian { .. } => "sturmian",
            SystemSpec::Rotation { .. } => "rotation",
            SystemSpec::Product { .. } => "product",
            SystemSpec::FiniteExtension { .. } => "finite_extension",
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Kind {
    Bernoulli { probs: Vec<f64>, cdf: Vec<f64> },
    Markov(MarkovChain),
    Substitution(Arc<Substitution>),
    Sturmian { alpha: Phase, coding: ArcLabeling },
    Rotation { alpha: Phase },
    Product(Vec<System>),
    Extension { alpha: Phase, fiber: u32, cocycle: ArcLabeling },
}

/// A validated system with its oracles.
#[derive(Debug, Clone)]
pub struct System {
    spec: SystemSpec,
    kind: Kind,
}

/// Symbol source of a symbolic point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Source {
    /// i.i.d. or Markov sequence generated from a seed.
    Stream(u64),
    /// Offset into the cyclic counting word of a substitution.
    Cycle(usize),
    /// Rotation phase coded by the Sturmian partition.
    Phase(Phase),
}

/// A point of a symbolic system: a lazily extended symbol sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolicPoint {
    source: Source,
    shift: usize,
    prefix: Vec<u8>,
}

/// A point of some system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Point {
    Symbolic(SymbolicPoint),
    Circle(Phase),
    Extension { base: Phase, fiber: u32 },
    Product(Vec<Point>),
}

impl Point {
    /// Phase of the underlying rotation, when there is one.
    pub fn phase(&self) -> Option<Phase> {
        match self {
            Point::Circle(z) => Some(*z),
            Point::Extension { base, .. } => Some(*base),
            Point::Symbolic(SymbolicPoint {
                source: Source::Phase(z),
                ..
            }) => Some(*z),
            _ => None,
        }
    }
}

/// Distance between two points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distance {
    pub value: f64,
    /// `false` when two symbolic points agree on the whole compared horizon;
    /// the true distance is then below `2^-METRIC_HORIZON`.
    pub resolved: bool,
}

impl System {
    pub fn new(spec: SystemSpec) -> Result<Self> {
        let kind = match &spec {
            SystemSpec::Bernoulli { probs } => {
                if probs.len() < 2 || probs.len() > 256 {
                    return invalid("Bernoulli alphabet must have between 2 and 256 letters");
                }
                if probs.iter().any(|p| !(*p >= 0.0)) {
                    return invalid("Bernoulli probabilities must be non-negative");
                }
                let s: f64 = probs.iter().sum();
                if (s - 1.0).abs() > PROB_TOL {
                    return invalid(format!("Bernoulli probabilities sum to {s}"));
                }
                let mut acc = 0.0;
                let cdf = probs
                    .iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect();
                Kind::Bernoulli {
                    probs: probs.clone(),
                    cdf,
                }
            }
            SystemSpec::Markov {
                transition,
                stationary,
            } => {
                if transition.len() > 256 {
                    return invalid("Markov alphabet is limited to 256 states");
                }
                Kind::Markov(MarkovChain::new(transition.clone(), stationary.clone())?)
            }
            SystemSpec::Substitution { rules, max_cycle } => {
                if rules.len() > 256 {
                    return invalid("substitution alphabet is limited to 256 letters");
                }
                Kind::Substitution(Arc::new(Substitution::new(
                    rules.clone(),
                    max_cycle.unwrap_or(DEFAULT_MAX_CYCLE),
                )?))
            }
            SystemSpec::Sturmian { alpha, cut } => {
                circle::check_irrational(*alpha)?;
                Kind::Sturmian {
                    alpha: *alpha,
                    coding: ArcLabeling::two_arcs(*cut)?,
                }
            }
            SystemSpec::Rotation { alpha } => {
                circle::check_irrational(*alpha)?;
                Kind::Rotation { alpha: *alpha }
            }
            SystemSpec::Product { components } => {
                if components.len() < 2 {
                    return invalid("product needs at least two components");
                }
                Kind::Product(
                    components
                        .iter()
                        .cloned()
                        .map(System::new)
                        .collect::<Result<_>>()?,
                )
            }
            SystemSpec::FiniteExtension {
                alpha,
                fiber,
                cocycle_cuts,
                cocycle_values,
            } => {
                circle::check_irrational(*alpha)?;
                if *fiber < 2 {
                    return invalid("fiber size must be at least 2");
                }
                if cocycle_values.iter().any(|v| v >= fiber) {
                    return invalid("cocycle values must lie in Z/m");
                }
                Kind::Extension {
                    alpha: *alpha,
                    fiber: *fiber,
                    cocycle: ArcLabeling::new(cocycle_cuts.clone(), cocycle_values.clone())?,
                }
            }
        };
        Ok(Self { spec, kind })
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    pub(crate) fn kind(&self) -> &Kind {
        &self.kind
    }

    pub fn kind_name(&self) -> &'static str {
        self.spec.kind_name()
    }

    pub fn components(&self) -> Option<&[System]> {
        match &self.kind {
            Kind::Product(c) => Some(c),
            _ => None,
        }
    }

    /// Rotation number of circle-based systems.
    pub fn rotation_number(&self) -> Option<Phase> {
        match &self.kind {
            Kind::Sturmian { alpha, .. } | Kind::Rotation { alpha } | Kind::Extension { alpha, .. } => {
                Some(*alpha)
            }
            _ => None,
        }
    }

    /// Alphabet size of symbolic systems.
    pub fn alphabet_size(&self) -> Option<usize> {
        match &self.kind {
            Kind::Bernoulli { probs, .. } => Some(probs.len()),
            Kind::Markov(m) => Some(m.states()),
            Kind::Substitution(s) => Some(s.alphabet_size()),
            Kind::Sturmian { .. } => Some(2),
            Kind::Product(cs) => cs
                .iter()
                .map(|c| c.alphabet_size())
                .try_fold(1usize, |acc, d| d.map(|d| acc * d))
                .filter(|&d| d <= 256),
            _ => None,
        }
    }

    pub fn is_symbolic(&self) -> bool {
        self.alphabet_size().is_some()
    }

    /// Whether measures are computed exactly (as opposed to estimated by counting).
    pub fn is_exact(&self) -> bool {
        match &self.kind {
            Kind::Substitution(_) => false,
            Kind::Product(cs) => cs.iter().all(|c| c.is_exact()),
            _ => true,
        }
    }

    pub fn substitution(&self) -> Option<&Substitution> {
        match &self.kind {
            Kind::Substitution(s) => Some(s),
            _ => None,
        }
    }

    fn kind_error(&self, op: &'static str) -> Error {
        Error::Kind {
            op,
            kind: self.kind_name(),
        }
    }

    /// Splits a product letter into component letters (first component most
    /// significant).
    fn split_letter(cs: &[System], mut letter: usize) -> Vec<u8> {
        let mut out = vec![0u8; cs.len()];
        for (i, c) in cs.iter().enumerate().rev() {
            let d = c.alphabet_size().unwrap();
            out[i] = (letter % d) as u8;
            letter /= d;
        }
        out
    }

    pub(crate) fn join_letters(cs: &[System], letters: &[u8]) -> u8 {
        let mut x = 0usize;
        for (c, &l) in cs.iter().zip(letters) {
            x = x * c.alphabet_size().unwrap() + l as usize;
        }
        x as u8
    }

    /// Measure of the cylinder `[w]` at coordinate 0.
    pub fn word_frequency(&self, w: &[u8]) -> Result<f64> {
        let d = self
            .alphabet_size()
            .ok_or_else(|| self.kind_error("word_frequency"))?;
        if w.len() > DEFAULT_SPAN_LIMIT {
            return Err(Error::Span {
                span: w.len(),
                limit: DEFAULT_SPAN_LIMIT,
            });
        }
        if let Some(b) = w.iter().find(|&&b| b as usize >= d) {
            return invalid(format!("letter {b} outside the alphabet of size {d}"));
        }
        Ok(match &self.kind {
            Kind::Bernoulli { probs, .. } => w.iter().map(|&a| probs[a as usize]).product(),
            Kind::Markov(m) => m.word_probability(w),
            Kind::Substitution(s) => s.word_frequency(w).0,
            Kind::Sturmian { alpha, coding } => {
                let positions: Vec<usize> = (0..w.len()).collect();
                sturmian_gapped(*alpha, coding, &positions)
                    .into_iter()
                    .filter(|(v, _)| v == w)
                    .map(|(_, m)| m)
                    .sum()
            }
            Kind::Product(cs) => {
                let mut parts = vec![Vec::with_capacity(w.len()); cs.len()];
                for &a in w {
                    for (i, l) in Self::split_letter(cs, a as usize).into_iter().enumerate() {
                        parts[i].push(l);
                    }
                }
                let mut f = 1.0;
                for (c, p) in cs.iter().zip(&parts) {
                    f *= c.word_frequency(p)?;
                }
                f
            }
            _ => unreachable!(),
        })
    }

    /// Joint law of the symbols at the strictly increasing `positions`
    /// (shift invariance makes only the differences matter). Zero-mass
    /// assignments are omitted.
    pub fn gapped_distribution(&self, positions: &[usize]) -> Result<Vec<(Vec<u8>, f64)>> {
        let d = self
            .alphabet_size()
            .ok_or_else(|| self.kind_error("gapped_distribution"))?;
        if positions.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("positions must be strictly increasing");
        }
        let Some(&first) = positions.first() else {
            return Ok(vec![(Vec::new(), 1.0)]);
        };
        let rel: Vec<usize> = positions.iter().map(|p| p - first).collect();
        let span = rel.last().unwrap() + 1;
        if span > DEFAULT_SPAN_LIMIT {
            return Err(Error::Span {
                span,
                limit: DEFAULT_SPAN_LIMIT,
            });
        }
        let too_large = |cells: f64| -> Result<()> {
            if cells > MAX_CELLS as f64 {
                Err(Error::Precondition(format!(
                    "exact enumeration would need up to {cells:.3e} cells (limit {MAX_CELLS})"
                )))
            } else {
                Ok(())
            }
        };
        match &self.kind {
            Kind::Bernoulli { probs, .. } => {
                let support: Vec<u8> = (0..d as u8).filter(|&a| probs[a as usize] > 0.0).collect();
                too_large((support.len() as f64).powi(rel.len() as i32))?;
                let mut out = vec![(Vec::new(), 1.0)];
                for _ in 0..rel.len() {
                    let mut next = Vec::with_capacity(out.len() * support.len());
                    for (w, m) in &out {
                        for &a in &support {
                            let mut v: Vec<u8> = w.clone();
                            v.push(a);
                            next.push((v, m * probs[a as usize]));
                        }
                    }
                    out = next;
                }
                Ok(out)
            }
            Kind::Markov(m) => {
                too_large((d as f64).powi(rel.len() as i32))?;
                Ok(m.gapped_distribution(&rel))
            }
            Kind::Substitution(s) => {
                let table = s.factor_table(span);
                let mut acc: std::collections::BTreeMap<Vec<u8>, f64> = Default::default();
                for (w, f) in &table.entries {
                    let v: Vec<u8> = rel.iter().map(|&p| w[p]).collect();
                    *acc.entry(v).or_insert(0.0) += f;
                }
                Ok(acc.into_iter().collect())
            }
            Kind::Sturmian { alpha, coding } => Ok(sturmian_gapped(*alpha, coding, &rel)),
            Kind::Product(cs) => {
                let dists: Vec<Vec<(Vec<u8>, f64)>> = cs
                    .iter()
                    .map(|c| c.gapped_distribution(&rel))
                    .collect::<Result<_>>()?;
                too_large(dists.iter().map(|x| x.len() as f64).product())?;
                let mut out: Vec<(Vec<Vec<u8>>, f64)> = vec![(Vec::new(), 1.0)];
                for dist in &dists {
                    let mut next = Vec::new();
                    for (ws, m) in &out {
                        for (w, f) in dist {
                            let mut v = ws.clone();
                            v.push(w.clone());
                            next.push((v, m * f));
                        }
                    }
                    out = next;
                }
                Ok(out
                    .into_iter()
                    .map(|(ws, m)| {
                        let word = (0..rel.len())
                            .map(|j| {
                                let letters: Vec<u8> = ws.iter().map(|w| w[j]).collect();
                                Self::join_letters(cs, &letters)
                            })
                            .collect();
                        (word, m)
                    })
                    .collect())
            }
            _ => unreachable!(),
        }
    }

    /// Samples a point from the invariant measure. Symbolic points carry
    /// their first `horizon` symbols and extend deterministically on demand.
    pub fn sample_point(&self, seed: u64, horizon: usize) -> Result<Point> {
        if horizon == 0 {
            return invalid("sampling horizon must be at least 1");
        }
        let mut rng = Rng64::new(seed);
        Ok(match &self.kind {
            Kind::Bernoulli { .. } | Kind::Markov(_) => {
                self.symbolic_point(Source::Stream(seed), 0, horizon)?
            }
            Kind::Substitution(s) => {
                let len = s.cycle().len();
                if len < 64 * horizon {
                    return Err(Error::Horizon {
                        needed: 64 * horizon,
                        available: len,
                    });
                }
                let start = rng.below(len as u64) as usize;
                self.symbolic_point(Source::Cycle(start), 0, horizon)?
            }
            Kind::Sturmian { .. } => {
                self.symbolic_point(Source::Phase(Phase(rng.next_u64())), 0, horizon)?
            }
            Kind::Rotation { .. } => Point::Circle(Phase(rng.next_u64())),
            Kind::Extension { fiber, .. } => Point::Extension {
                base: Phase(rng.next_u64()),
                fiber: rng.below(*fiber as u64) as u32,
            },
            Kind::Product(cs) => Point::Product(
                cs.iter()
                    .enumerate()
                    .map(|(i, c)| c.sample_point(derive_seed(seed, i as u64), horizon))
                    .collect::<Result<_>>()?,
            ),
        })
    }

    fn symbolic_point(&self, source: Source, shift: usize, len: usize) -> Result<Point> {
        let prefix = self.generate(source, shift, len)?;
        Ok(Point::Symbolic(SymbolicPoint {
            source,
            shift,
            prefix,
        }))
    }

    fn generate(&self, source: Source, shift: usize, len: usize) -> Result<Vec<u8>> {
        match (source, &self.kind) {
            (Source::Stream(seed), Kind::Bernoulli { cdf, .. }) => {
                let mut rng = Rng64::new(seed);
                let all: Vec<u8> = (0..shift + len).map(|_| rng.categorical(cdf) as u8).collect();
                Ok(all[shift..].to_vec())
            }
            (Source::Stream(seed), Kind::Markov(m)) => {
                let mut rng = Rng64::new(seed);
                let mut out = Vec::with_capacity(shift + len);
                if shift + len > 0 {
                    let mut s = rng.categorical(m.stationary_cdf());
                    out.push(s as u8);
                    for _ in 1..shift + len {
                        s = rng.categorical(m.row_cdf(s));
                        out.push(s as u8);
                    }
                }
                Ok(out[shift..].to_vec())
            }
            (Source::Cycle(start), Kind::Substitution(s)) => {
                let c = s.cycle();
                if shift + len > c.len() {
                    return Err(Error::Horizon {
                        needed: shift + len,
                        available: c.len(),
                    });
                }
                Ok((0..len).map(|j| c[(start + shift + j) % c.len()]).collect())
            }
            (Source::Phase(z), Kind::Sturmian { alpha, coding }) => Ok((0..len)
                .map(|j| coding.label_at(z.plus(alpha.times((shift + j) as u64))) as u8)
                .collect()),
            _ => Err(self.kind_error("generate")),
        }
    }

    /// The first `len` symbols of a point of a symbolic system.
    pub fn symbols<'a>(&self, x: &'a Point, len: usize) -> Result<Cow<'a, [u8]>> {
        match (x, &self.kind) {
            (Point::Symbolic(p), _) => {
                if p.prefix.len() >= len {
                    Ok(Cow::Borrowed(&p.prefix[..len]))
                } else {
                    Ok(Cow::Owned(self.generate(p.source, p.shift, len)?))
                }
            }
            (Point::Product(ps), Kind::Product(cs)) if self.is_symbolic() => {
                let parts: Vec<Cow<[u8]>> = cs
                    .iter()
                    .zip(ps)
                    .map(|(c, p)| c.symbols(p, len))
                    .collect::<Result<_>>()?;
                Ok(Cow::Owned(
                    (0..len)
                        .map(|j| {
                            let letters: Vec<u8> = parts.iter().map(|w| w[j]).collect();
                            Self::join_letters(cs, &letters)
                        })
                        .collect(),
                ))
            }
            _ => Err(self.kind_error("symbols")),
        }
    }

    /// `T^k x`.
    pub fn shift(&self, x: &Point, k: usize) -> Result<Point> {
        Ok(match (x, &self.kind) {
            (Point::Symbolic(p), _) => {
                let source = match (p.source, &self.kind) {
                    (Source::Phase(z), Kind::Sturmian { alpha, .. }) => {
                        // Keep the phase source canonical: shift folded into the phase.
                        let z2 = z.plus(alpha.times((p.shift + k) as u64));
                        return Ok(Point::Symbolic(SymbolicPoint {
                            source: Source::Phase(z2),
                            shift: 0,
                            prefix: p.prefix.get(k..).map(|s| s.to_vec()).unwrap_or_default(),
                        }));
                    }
                    (s, _) => s,
                };
                Point::Symbolic(SymbolicPoint {
                    source,
                    shift: p.shift + k,
                    prefix: p.prefix.get(k..).map(|s| s.to_vec()).unwrap_or_default(),
                })
            }
            (Point::Circle(z), Kind::Rotation { alpha }) => Point::Circle(z.plus(alpha.times(k as u64))),
            (Point::Extension { base, fiber }, Kind::Extension { alpha, fiber: m, cocycle }) => {
                let mut z = *base;
                let mut j = *fiber;
                for _ in 0..k {
                    j = (j + cocycle.label_at(z)) % m;
                    z = z.plus(*alpha);
                }
                Point::Extension { base: z, fiber: j }
            }
            (Point::Product(ps), Kind::Product(cs)) => Point::Product(
                cs.iter()
                    .zip(ps)
                    .map(|(c, p)| c.shift(p, k))
                    .collect::<Result<_>>()?,
            ),
            _ => return Err(self.kind_error("shift")),
        })
    }

    /// Whether two points are distinct at the resolution the toolkit uses:
    /// the first [`METRIC_HORIZON`] symbols for symbolic points, exact
    /// fixed-point phases otherwise.
    pub fn distinct(&self, x: &Point, y: &Point) -> Result<bool> {
        match (x, y, &self.kind) {
            (Point::Product(a), Point::Product(b), Kind::Product(cs)) => {
                for ((c, p), q) in cs.iter().zip(a).zip(b) {
                    if c.distinct(p, q)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            (Point::Symbolic(_), Point::Symbolic(_), _) => {
                Ok(self.symbols(x, METRIC_HORIZON)? != self.symbols(y, METRIC_HORIZON)?)
            }
            (Point::Circle(a), Point::Circle(b), _) => Ok(a != b),
            (
                Point::Extension { base: a, fiber: i },
                Point::Extension { base: b, fiber: j },
                _,
            ) => Ok(a != b || i != j),
            _ => Err(self.kind_error("distinct")),
        }
    }

    /// `d(x, y)`: `2^-j` at the first differing coordinate `j` for symbolic
    /// systems, arc length for rotations, and the max over components of products.
    pub fn metric_distance(&self, x: &Point, y: &Point) -> Result<Distance> {
        Ok(self.distance_profile(x, y, 1)?[0])
    }

    /// `d(T^k x, T^k y)` for `k < n`.
    pub fn distance_profile(&self, x: &Point, y: &Point, n: usize) -> Result<Vec<Distance>> {
        match (x, y, &self.kind) {
            (Point::Circle(a), Point::Circle(b), Kind::Rotation { alpha }) => Ok((0..n)
                .map(|k| {
                    let s = alpha.times(k as u64);
                    Distance {
                        value: a.plus(s).arc_distance(b.plus(s)),
                        resolved: true,
                    }
                })
                .collect()),
            (Point::Extension { .. }, Point::Extension { .. }, Kind::Extension { .. }) => {
                let mut out = Vec::with_capacity(n);
                let (mut p, mut q) = (x.clone(), y.clone());
                for _ in 0..n {
                    let (Point::Extension { base: a, fiber: i }, Point::Extension { base: b, fiber: j }) =
                        (&p, &q)
                    else {
                        unreachable!()
                    };
                    out.push(Distance {
                        value: if i == j { a.arc_distance(*b) } else { 1.0 },
                        resolved: true,
                    });
                    p = self.shift(&p, 1)?;
                    q = self.shift(&q, 1)?;
                }
                Ok(out)
            }
            (Point::Symbolic(_), Point::Symbolic(_), _) => {
                let len = n + METRIC_HORIZON;
                let a = self.symbols(x, len)?;
                let b = self.symbols(y, len)?;
                // next_diff[k] = first j >= k with a[j] != b[j] (or len).
                let mut next_diff = vec![len; len + 1];
                for k in (0..len).rev() {
                    next_diff[k] = if a[k] != b[k] { k } else { next_diff[k + 1] };
                }
                Ok((0..n)
                    .map(|k| {
                        let j = next_diff[k] - k;
                        if j < METRIC_HORIZON {
                            Distance {
                                value: 0.5f64.powi(j as i32),
                                resolved: true,
                            }
                        } else {
                            Distance {
                                value: 0.0,
                                resolved: false,
                            }
                        }
                    })
                    .collect())
            }
            (Point::Product(a), Point::Product(b), Kind::Product(cs)) => {
                let mut out = vec![
                    Distance {
                        value: 0.0,
                        resolved: true
                    };
                    n
                ];
                for ((c, p), q) in cs.iter().zip(a).zip(b) {
                    for (o, d) in out.iter_mut().zip(c.distance_profile(p, q, n)?) {
                        if d.value > o.value {
                            o.value = d.value;
                        }
                        o.resolved &= d.resolved || d.value > 0.0;
                    }
                }
                Ok(out)
            }
            _ => Err(self.kind_error("metric_distance")),
        }
    }
}

/// Law of the Sturmian symbols at `positions`: cut the circle at the
/// preimages of the coding cut points and read each arc's word at its midpoint.
fn sturmian_gapped(alpha: Phase, coding: &ArcLabeling, positions: &[usize]) -> Vec<(Vec<u8>, f64)> {
    let mut pts = Vec::with_capacity(positions.len() * coding.cuts().len());
    for &u in positions {
        let shift = alpha.times(u as u64);
        for &c in coding.cuts() {
            pts.push(c.minus(shift));
        }
    }
    let mut acc: std::collections::BTreeMap<Vec<u8>, f64> = Default::default();
    for arc in circle::arrangement(pts) {
        let w: Vec<u8> = positions
            .iter()
            .map(|&u| coding.label_at(arc.mid.plus(alpha.times(u as u64))) as u8)
            .collect();
        *acc.entry(w).or_insert(0.0) += arc.mass;
    }
    acc.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys(spec: SystemSpec) -> System {
        System::new(spec).unwrap()
    }

    #[test]
    fn bernoulli_word() {
        let b = sys(SystemSpec::bernoulli(&[0.5, 0.5]));
        assert_eq!(b.word_frequency(&[0, 1]).unwrap(), 0.25);
    }

    #[test]
    fn markov_word() {
        let m = sys(SystemSpec::Markov {
            transition: vec![vec![0.5, 0.5], vec![1.0, 0.0]],
            stationary: Some(vec![2.0 / 3.0, 1.0 / 3.0]),
        });
        assert!((m.word_frequency(&[1, 0]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn thue_morse_eleven() {
        let tm = sys(SystemSpec::thue_morse());
        // Independent oracle: plain (non-cyclic) counts of "11" in σ^m(0).
        let mut w = vec![0u8];
        let mut estimates = Vec::new();
        for m in 1..=20 {
            w = w.iter().flat_map(|&a| if a == 0 { [0, 1] } else { [1, 0] }).collect();
            if m >= 16 && m % 2 == 0 {
                let c = w.windows(2).filter(|p| p == &[1, 1]).count();
                estimates.push(c as f64 / (w.len() - 1) as f64);
            }
        }
        assert!(estimates.windows(2).all(|e| (e[0] - e[1]).abs() < 1e-4));
        let f = tm.word_frequency(&[1, 1]).unwrap();
        assert!((f - 1.0 / 6.0).abs() < 1e-4);
        assert!((f - estimates.last().unwrap()).abs() < 1e-4);
    }

    #[test]
    fn sturmian_frequencies_are_arc_lengths() {
        let st = sys(SystemSpec::golden_sturmian());
        let a = circle::golden().to_f64();
        assert!((st.word_frequency(&[0]).unwrap() - a).abs() < 1e-15);
        assert!((st.word_frequency(&[1]).unwrap() - (1.0 - a)).abs() < 1e-15);
        // Golden Sturmian coding with cut alpha never shows "11"... or "00"
        // depending on convention; exactly one of them is absent.
        let f00 = st.word_frequency(&[0, 0]).unwrap();
        let f11 = st.word_frequency(&[1, 1]).unwrap();
        assert!(f00 == 0.0 || f11 == 0.0);
    }

    #[test]
    fn bernoulli_sample_frequency() {
        let b = sys(SystemSpec::bernoulli(&[0.5, 0.5]));
        let x = b.sample_point(77, 100_000).unwrap();
        let s = b.symbols(&x, 100_000).unwrap();
        let ones = s.iter().filter(|&&a| a == 1).count() as f64 / 1e5;
        assert!((0.494..=0.506).contains(&ones), "{ones}");
    }

    #[test]
    fn rotation_sample_in_unit_interval() {
        let r = sys(SystemSpec::golden_rotation());
        for seed in 0..10 {
            let p = r.sample_point(seed, 1).unwrap().phase().unwrap().to_f64();
            assert!((0.0..1.0).contains(&p));
        }
    }

    #[test]
    fn thue_morse_samples_are_factors() {
        let tm = sys(SystemSpec::thue_morse());
        let mut w = vec![0u8];
        for _ in 0..12 {
            w = w.iter().flat_map(|&a| if a == 0 { [0, 1] } else { [1, 0] }).collect();
        }
        for seed in 0..5 {
            let x = tm.sample_point(seed, 1000).unwrap();
            let s = tm.symbols(&x, 1000).unwrap();
            assert!(w.windows(1000).any(|v| v == &s[..]), "seed {seed}");
        }
    }

    #[test]
    fn extension_is_deterministic() {
        let s = tm_free_extension();
        let x = s.sample_point(3, 1).unwrap();
        let a = s.shift(&s.shift(&x, 5).unwrap(), 7).unwrap();
        let b = s.shift(&x, 12).unwrap();
        assert_eq!(a, b);
    }

    fn tm_free_extension() -> System {
        sys(SystemSpec::FiniteExtension {
            alpha: circle::golden(),
            fiber: 2,
            cocycle_cuts: vec![Phase::ZERO, Phase(1 << 63)],
            cocycle_values: vec![1, 0],
        })
    }

    #[test]
    fn shifted_points_read_later_symbols() {
        let b = sys(SystemSpec::bernoulli(&[0.3, 0.7]));
        let x = b.sample_point(5, 10).unwrap();
        let long = b.symbols(&x, 50).unwrap().into_owned();
        let y = b.shift(&x, 13).unwrap();
        assert_eq!(&b.symbols(&y, 30).unwrap()[..], &long[13..43]);
        let st = sys(SystemSpec::golden_sturmian());
        let x = st.sample_point(5, 10).unwrap();
        let long = st.symbols(&x, 50).unwrap().into_owned();
        let y = st.shift(&x, 13).unwrap();
        assert_eq!(&st.symbols(&y, 30).unwrap()[..], &long[13..43]);
    }

    #[test]
    fn metric_examples() {
        let b = sys(SystemSpec::bernoulli(&[0.5, 0.5]));
        let x = b.sample_point(1, 100).unwrap();
        let d = b.metric_distance(&x, &x).unwrap();
        assert!(!d.resolved && d.value < 0.5f64.powi(METRIC_HORIZON as i32 - 1));
        let mut y = None;
        for seed in 2..100 {
            let c = b.sample_point(seed, 100).unwrap();
            if b.symbols(&c, 1).unwrap()[0] != b.symbols(&x, 1).unwrap()[0] {
                y = Some(c);
                break;
            }
        }
        assert_eq!(b.metric_distance(&x, &y.unwrap()).unwrap().value, 1.0);
        let r = sys(SystemSpec::golden_rotation());
        let d = r
            .metric_distance(&Point::Circle(Phase::from_f64(0.1)), &Point::Circle(Phase::from_f64(0.95)))
            .unwrap();
        assert!((d.value - 0.15).abs() < 1e-15);
        assert!(r.metric_distance(&Point::Circle(Phase::ZERO), &x).is_err());
    }

    #[test]
    fn rejects_rational_rotation() {
        let err = System::new(SystemSpec::Rotation {
            alpha: Phase::parse_decimal("0.25").unwrap(),
        })
        .unwrap_err();
        assert!(format!("{err}").contains("continued fraction"));
    }

    #[test]
    fn non_symbolic_word_frequency_is_a_kind_error() {
        let r = sys(SystemSpec::golden_rotation());
        assert!(matches!(r.word_frequency(&[0]), Err(Error::Kind { .. })));
        let b = sys(SystemSpec::bernoulli(&[0.5, 0.5]));
        assert!(matches!(b.word_frequency(&vec![0; 5000]), Err(Error::Span { .. })));
    }

    #[test]
    fn product_frequency_factorises() {
        let p = sys(SystemSpec::Product {
            components: vec![SystemSpec::bernoulli(&[0.25, 0.75]), SystemSpec::bernoulli(&[0.5, 0.5])],
        });
        assert_eq!(p.alphabet_size(), Some(4));
        // letter 3 = (1, 1)
        assert!((p.word_frequency(&[3]).unwrap() - 0.375).abs() < 1e-15);
        let total: f64 = (0..4u8).map(|a| p.word_frequency(&[a]).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn config_round_trip() {
        let spec: SystemSpec = toml::from_str("kind = \"substitution\"\nrules = [\"01\", \"10\"]").unwrap();
        assert_eq!(spec, SystemSpec::thue_morse());
        let spec: SystemSpec =
            toml::from_str("kind = \"rotation\"\nalpha = \"0.6180339887498948482045868343656381177203\"").unwrap();
        assert_eq!(spec, SystemSpec::golden_rotation());
        let text = toml::to_string(&spec).unwrap();
        assert_eq!(toml::from_str::<SystemSpec>(&text).unwrap(), spec);
    }
}
