//! Finite partitions of a system, their joins, and joint laws along time patterns.
//!
//! A [`PartitionSpec`] is resolved against a [`System`] into a [`Partition`],
//! which knows its positive-mass atoms. Atoms are indexed `0..atom_count` in
//! the order of their canonical labels, so reports do not depend on how
//! atoms were listed in the input.

mod cells;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::num::{entropy_of, ProbVector};
use crate::systems::{ArcLabeling, Phase, Point, System};
pub use cells::CellTable;
use cells::{CellState, Req};

/// Description of a partition, as read from a configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PartitionSpec {
    /// The one-atom partition `{X}`.
    Trivial,
    /// Atoms are the words of length `length` read from coordinate 0.
    Word { length: usize },
    /// Letter (or fiber, for finite extensions) to atom index.
    SymbolMap { map: Vec<u32> },
    /// Arc `[cuts[i], cuts[i+1])` of the circle goes to atom `atoms[i]`.
    Interval { cuts: Vec<Phase>, atoms: Vec<u32> },
    /// One partition per component of a product system.
    Product { parts: Vec<PartitionSpec> },
    /// Common refinement of several partitions of the same system.
    Join { parts: Vec<PartitionSpec> },
}

impl PartitionSpec {
    pub fn letters() -> Self {
        PartitionSpec::Word { length: 1 }
    }

    /// `{[0, c), [c, 1)}`.
    pub fn halves(c: Phase) -> Self {
        PartitionSpec::Interval {
            cuts: vec![Phase::ZERO, c],
            atoms: vec![0, 1],
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            PartitionSpec::Trivial => "trivial",
            PartitionSpec::Word { .. } => "word",
            PartitionSpec::SymbolMap { .. } => "symbol_map",
            PartitionSpec::Interval { .. } => "interval",
            PartitionSpec::Product { .. } => "product",
            PartitionSpec::Join { .. } => "join",
        }
    }
}

#[derive(Debug, Clone)]
enum Rule {
    Trivial,
    Word { length: usize, base: u64 },
    SymbolMap(Vec<u32>),
    Interval(ArcLabeling),
    Product(Vec<Partition>),
    Join(Vec<Partition>),
}

/// A partition resolved against a system.
#[derive(Debug, Clone)]
pub struct Partition {
    spec: PartitionSpec,
    rule: Rule,
    req: Req,
    /// Canonical labels of the positive-mass atoms, increasing.
    atoms: Vec<u64>,
    masses: Vec<f64>,
}

/// Strictly increasing, non-empty list of times.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct TimePattern(Vec<usize>);

impl TimePattern {
    pub fn new(times: Vec<usize>) -> Result<Self> {
        if times.is_empty() {
            return invalid("a time pattern needs at least one time");
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("pattern times must be strictly increasing");
        }
        Ok(Self(times))
    }

    pub fn times(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl TryFrom<Vec<usize>> for TimePattern {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<TimePattern> for Vec<usize> {
    fn from(p: TimePattern) -> Self {
        p.0
    }
}

/// Law of `(atom(T^{t_1} x), ..., atom(T^{t_k} x))`.
#[derive(Debug, Clone, Serialize)]
pub struct JointDistribution {
    pub pattern: TimePattern,
    /// Labelled by tuples of atom indices, in lexicographic order.
    pub dist: ProbVector<Vec<u32>>,
}

impl JointDistribution {
    pub fn entropy(&self) -> f64 {
        entropy_of(self.dist.probs())
    }
}

/// Packs indices `x_i < radix_i` into one number, first index most significant.
fn mixed_radix(digits: impl Iterator<Item = (u64, u64)>) -> u64 {
    digits.fold(0, |acc, (d, r)| acc * r + d)
}

fn check_radix(radices: impl Iterator<Item = u64>) -> Result<()> {
    let mut acc: u64 = 1;
    for r in radices {
        acc = match acc.checked_mul(r) {
            Some(a) => a,
            None => return invalid("joined partition has too many potential atoms"),
        };
    }
    Ok(())
}

impl Partition {
    pub fn resolve(sys: &System, spec: &PartitionSpec) -> Result<Self> {
        let kind_err = || Error::Kind {
            op: "partition",
            kind: sys.kind_name(),
        };
        let rule = match spec {
            PartitionSpec::Trivial => Rule::Trivial,
            PartitionSpec::Word { length } => {
                let d = sys.alphabet_size().ok_or_else(|| Error::Kind {
                    op: "word partition",
                    kind: sys.kind_name(),
                })?;
                if *length == 0 {
                    return invalid("word partition length must be at least 1");
                }
                if (d as u64).checked_pow(*length as u32).is_none() {
                    return invalid(format!("words of length {length} over {d} letters do not fit in 64 bits"));
                }
                Rule::Word {
                    length: *length,
                    base: d as u64,
                }
            }
            PartitionSpec::SymbolMap { map } => {
                let expected = match sys.spec() {
                    crate::systems::SystemSpec::FiniteExtension { fiber, .. } => *fiber as usize,
                    _ => sys.alphabet_size().ok_or_else(kind_err)?,
                };
                if map.len() != expected {
                    return invalid(format!(
                        "symbol map has {} entries, the system has {expected} symbols",
                        map.len()
                    ));
                }
                Rule::SymbolMap(map.clone())
            }
            PartitionSpec::Interval { cuts, atoms } => {
                if !matches!(
                    sys.spec(),
                    crate::systems::SystemSpec::Rotation { .. }
                        | crate::systems::SystemSpec::FiniteExtension { .. }
                ) {
                    return Err(Error::Kind {
                        op: "interval partition",
                        kind: sys.kind_name(),
                    });
                }
                Rule::Interval(ArcLabeling::new(cuts.clone(), atoms.clone())?)
            }
            PartitionSpec::Product { parts } => {
                let comps = sys.components().ok_or_else(|| Error::Kind {
                    op: "product partition",
                    kind: sys.kind_name(),
                })?;
                if comps.len() != parts.len() {
                    return invalid(format!(
                        "product partition has {} parts for {} components",
                        parts.len(),
                        comps.len()
                    ));
                }
                let parts: Vec<Partition> = comps
                    .iter()
                    .zip(parts)
                    .map(|(c, p)| Partition::resolve(c, p))
                    .collect::<Result<_>>()?;
                check_radix(parts.iter().map(|p| p.atom_count() as u64))?;
                Rule::Product(parts)
            }
            PartitionSpec::Join { parts } => {
                if parts.is_empty() {
                    return invalid("join of no partitions");
                }
                let parts: Vec<Partition> = parts
                    .iter()
                    .map(|p| Partition::resolve(sys, p))
                    .collect::<Result<_>>()?;
                check_radix(parts.iter().map(|p| p.atom_count() as u64))?;
                Rule::Join(parts)
            }
        };
        let req = Req::of(sys, &rule)?;
        let mut part = Partition {
            spec: spec.clone(),
            rule,
            req,
            atoms: Vec::new(),
            masses: Vec::new(),
        };
        let states = cells::build(sys, &part.req, &[0])?;
        let mut acc: HashMap<u64, f64> = HashMap::new();
        for (s, m) in &states {
            *acc.entry(part.raw(sys, s, 0, 0)?).or_insert(0.0) += m;
        }
        let mut atoms: Vec<(u64, f64)> = acc.into_iter().filter(|(_, m)| *m > 0.0).collect();
        atoms.sort_by_key(|a| a.0);
        part.atoms = atoms.iter().map(|a| a.0).collect();
        part.masses = atoms.iter().map(|a| a.1).collect();
        Ok(part)
    }

    pub fn spec(&self) -> &PartitionSpec {
        &self.spec
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    /// Canonical labels of the atoms, indexed by atom index.
    pub fn atom_labels(&self) -> &[u64] {
        &self.atoms
    }

    pub fn atom_masses(&self) -> &[f64] {
        &self.masses
    }

    /// Symbols read per time step (0 for partitions that do not look at symbols).
    pub fn window(&self) -> usize {
        self.req.window()
    }

    fn index_of(&self, raw: u64) -> Result<u32> {
        self.atoms
            .binary_search(&raw)
            .map(|i| i as u32)
            .map_err(|_| Error::Precondition(format!("orbit entered atom {raw}, which has measure zero")))
    }

    /// Atom index of the cell state at time `times[i] = t`.
    pub(crate) fn atom_at(&self, sys: &System, state: &CellState, i: usize, t: usize) -> Result<u32> {
        self.index_of(self.raw(sys, state, i, t)?)
    }

    fn raw(&self, sys: &System, state: &CellState, i: usize, t: usize) -> Result<u64> {
        Ok(match &self.rule {
            Rule::Trivial => 0,
            Rule::Word { length, base } => {
                let w = state.word_at(sys, t, *length)?;
                mixed_radix(w.iter().map(|&a| (a as u64, *base)))
            }
            Rule::SymbolMap(map) => match state {
                CellState::Circle { fibers, .. } => map[fibers[i] as usize] as u64,
                _ => map[state.word_at(sys, t, 1)?[0] as usize] as u64,
            },
            Rule::Interval(lab) => match state {
                CellState::Circle { mid, .. } => {
                    let alpha = sys.rotation_number().unwrap();
                    lab.label_at(mid.plus(alpha.times(t as u64))) as u64
                }
                _ => unreachable!("interval partitions only resolve on circle systems"),
            },
            Rule::Product(parts) => {
                let CellState::Product(states) = state else {
                    unreachable!("product partitions only resolve on product systems")
                };
                let comps = sys.components().unwrap();
                let mut digits = Vec::with_capacity(parts.len());
                for ((p, c), s) in parts.iter().zip(comps).zip(states) {
                    digits.push((p.atom_at(c, s, i, t)? as u64, p.atom_count() as u64));
                }
                mixed_radix(digits.into_iter())
            }
            Rule::Join(parts) => {
                let mut digits = Vec::with_capacity(parts.len());
                for p in parts {
                    digits.push((p.atom_at(sys, state, i, t)? as u64, p.atom_count() as u64));
                }
                mixed_radix(digits.into_iter())
            }
        })
    }

    /// Atom indices along the orbit of `x` at times `0..n`.
    pub fn orbit_atom_sequence(&self, sys: &System, x: &Point, n: usize) -> Result<Vec<u32>> {
        let state = cells::point_state(sys, &self.req, x, n)?;
        (0..n).map(|t| self.atom_at(sys, &state, t, t)).collect()
    }
}

/// Shannon entropy (nats) of the atom measures.
pub fn partition_entropy(part: &Partition) -> f64 {
    entropy_of(part.atom_masses())
}

/// The common refinement `a ∨ b` as a partition of `sys`.
pub fn refine(sys: &System, a: &Partition, b: &Partition) -> Result<Partition> {
    Partition::resolve(
        sys,
        &PartitionSpec::Join {
            parts: vec![a.spec.clone(), b.spec.clone()],
        },
    )
}

/// Exact joint law of the atoms visited at the pattern times.
pub fn joint_distribution(sys: &System, part: &Partition, pattern: &TimePattern) -> Result<JointDistribution> {
    let table = CellTable::build(sys, part, pattern.times())?;
    let mut acc: HashMap<Vec<u32>, f64> = HashMap::new();
    for c in 0..table.cells() {
        let tuple: Vec<u32> = (0..pattern.len()).map(|i| table.label(i, c)).collect();
        *acc.entry(tuple).or_insert(0.0) += table.masses()[c];
    }
    let mut entries: Vec<(Vec<u32>, f64)> = acc.into_iter().filter(|e| e.1 > 0.0).collect();
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    let (labels, probs) = entries.into_iter().unzip();
    Ok(JointDistribution {
        pattern: pattern.clone(),
        dist: ProbVector::new(probs, labels)?,
    })
}
