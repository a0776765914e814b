//! Finite cell decompositions: the system is cut into cells on which every
//! requested atom observation is constant, so joint laws reduce to sums of
//! cell masses.

use std::borrow::Cow;
use std::sync::Arc;

use super::{Partition, Rule};
use crate::error::{Error, Result};
use crate::systems::{circle, Kind, Phase, Point, System, MAX_CELLS};

/// What a partition needs to observe from a cell.
#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct Req {
    /// Symbols read from each observed time.
    window: usize,
    /// Circle cut points.
    cuts: Vec<Phase>,
    /// Whether the fiber coordinate of a finite extension is observed.
    fiber: bool,
    /// Per-component needs on product systems.
    components: Vec<Req>,
}

impl Req {
    pub(super) fn of(sys: &System, rule: &Rule) -> Result<Req> {
        Ok(match rule {
            Rule::Trivial => Req::default(),
            Rule::Word { length, .. } => Self::symbolic(sys, *length),
            Rule::SymbolMap(_) => {
                if matches!(sys.kind(), Kind::Extension { .. }) {
                    Req {
                        fiber: true,
                        ..Req::default()
                    }
                } else {
                    Self::symbolic(sys, 1)
                }
            }
            Rule::Interval(lab) => Req {
                cuts: lab.cuts().to_vec(),
                ..Req::default()
            },
            Rule::Product(parts) => Req {
                components: parts.iter().map(|p| p.req.clone()).collect(),
                ..Req::default()
            },
            Rule::Join(parts) => parts
                .iter()
                .fold(Req::default(), |acc, p| acc.merge(&p.req)),
        })
    }

    fn symbolic(sys: &System, window: usize) -> Req {
        match sys.components() {
            Some(cs) => Req {
                components: cs.iter().map(|c| Self::symbolic(c, window)).collect(),
                ..Req::default()
            },
            None => Req {
                window,
                ..Req::default()
            },
        }
    }

    fn merge(&self, other: &Req) -> Req {
        let n = self.components.len().max(other.components.len());
        let empty = Req::default();
        Req {
            window: self.window.max(other.window),
            cuts: self.cuts.iter().chain(&other.cuts).copied().collect(),
            fiber: self.fiber || other.fiber,
            components: (0..n)
                .map(|i| {
                    self.components
                        .get(i)
                        .unwrap_or(&empty)
                        .merge(other.components.get(i).unwrap_or(&empty))
                })
                .collect(),
        }
    }

    fn is_trivial(&self) -> bool {
        self.window == 0 && self.cuts.is_empty() && !self.fiber && self.components.iter().all(Req::is_trivial)
    }

    pub(super) fn window(&self) -> usize {
        self.components
            .iter()
            .map(Req::window)
            .fold(self.window, usize::max)
    }

    fn component(&self, i: usize) -> Req {
        self.components.get(i).cloned().unwrap_or_default()
    }
}

/// The data of one cell needed to evaluate atoms at the requested times.
#[derive(Debug, Clone)]
pub(crate) enum CellState {
    Trivial,
    /// Symbols at `positions` (shared by all cells of one decomposition).
    Word { symbols: Vec<u8>, positions: Arc<Vec<usize>> },
    /// A base point of a circle system and, when observed, the fiber at each requested time.
    Circle { mid: Phase, fibers: Vec<u32> },
    Product(Vec<CellState>),
}

impl CellState {
    pub(super) fn word_at(&self, sys: &System, t: usize, len: usize) -> Result<Cow<'_, [u8]>> {
        match self {
            CellState::Word { symbols, positions } => {
                let i = positions
                    .binary_search(&t)
                    .map_err(|_| Error::Precondition(format!("time {t} not covered by the cell decomposition")))?;
                Ok(Cow::Borrowed(&symbols[i..i + len]))
            }
            CellState::Product(states) => {
                let cs = sys.components().unwrap();
                let parts: Vec<Cow<[u8]>> = cs
                    .iter()
                    .zip(states)
                    .map(|(c, s)| s.word_at(c, t, len))
                    .collect::<Result<_>>()?;
                Ok(Cow::Owned(
                    (0..len)
                        .map(|j| {
                            let letters: Vec<u8> = parts.iter().map(|p| p[j]).collect();
                            System::join_letters(cs, &letters)
                        })
                        .collect(),
                ))
            }
            _ => Err(Error::Kind {
                op: "word observation",
                kind: sys.kind_name(),
            }),
        }
    }
}

fn covered_positions(times: &[usize], window: usize) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::with_capacity(times.len() * window);
    for &t in times {
        for p in t..t + window {
            if out.last().is_none_or(|&l| p > l) {
                out.push(p);
            }
        }
    }
    out
}

fn kind_error(sys: &System) -> Error {
    Error::Kind {
        op: "partition observation",
        kind: sys.kind_name(),
    }
}

/// Fiber offsets `sum_{s<t} phi(z + s alpha)` at each of the increasing `times`.
fn fiber_offsets(alpha: Phase, m: u32, cocycle: &circle::ArcLabeling, z: Phase, times: &[usize]) -> Vec<u32> {
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0u32;
    let mut x = z;
    let mut s = 0usize;
    for &t in times {
        while s < t {
            acc = (acc + cocycle.label_at(x)) % m;
            x = x.plus(alpha);
            s += 1;
        }
        out.push(acc);
    }
    out
}

/// Cells with positive mass covering the system, for observation at the
/// increasing `times`.
pub(crate) fn build(sys: &System, req: &Req, times: &[usize]) -> Result<Vec<(CellState, f64)>> {
    if req.is_trivial() {
        return Ok(vec![(CellState::Trivial, 1.0)]);
    }
    match sys.kind() {
        Kind::Product(cs) => {
            let parts: Vec<Vec<(CellState, f64)>> = cs
                .iter()
                .enumerate()
                .map(|(i, c)| build(c, &req.component(i), times))
                .collect::<Result<_>>()?;
            let total: f64 = parts.iter().map(|p| p.len() as f64).product();
            if total > MAX_CELLS as f64 {
                return Err(too_many(total));
            }
            let mut out: Vec<(Vec<CellState>, f64)> = vec![(Vec::new(), 1.0)];
            for part in &parts {
                let mut next = Vec::with_capacity(out.len() * part.len());
                for (states, m) in &out {
                    for (s, f) in part {
                        let mut v = states.clone();
                        v.push(s.clone());
                        next.push((v, m * f));
                    }
                }
                out = next;
            }
            Ok(out.into_iter().map(|(s, m)| (CellState::Product(s), m)).collect())
        }
        Kind::Rotation { alpha } => {
            if req.window > 0 || req.fiber {
                return Err(kind_error(sys));
            }
            let points = times
                .iter()
                .flat_map(|&t| req.cuts.iter().map(move |c| c.minus(alpha.times(t as u64))))
                .collect();
            Ok(circle::arrangement(points)
                .into_iter()
                .map(|a| {
                    (
                        CellState::Circle {
                            mid: a.mid,
                            fibers: Vec::new(),
                        },
                        a.mass,
                    )
                })
                .collect())
        }
        Kind::Extension { alpha, fiber, cocycle } => {
            if req.window > 0 {
                return Err(kind_error(sys));
            }
            let mut points: Vec<Phase> = times
                .iter()
                .flat_map(|&t| req.cuts.iter().map(move |c| c.minus(alpha.times(t as u64))))
                .collect();
            if !req.fiber {
                return Ok(circle::arrangement(points)
                    .into_iter()
                    .map(|a| {
                        (
                            CellState::Circle {
                                mid: a.mid,
                                fibers: Vec::new(),
                            },
                            a.mass,
                        )
                    })
                    .collect());
            }
            let max_t = times.last().copied().unwrap_or(0);
            for s in 0..max_t {
                for c in cocycle.cuts() {
                    points.push(c.minus(alpha.times(s as u64)));
                }
            }
            let arcs = circle::arrangement(points);
            if arcs.len() as f64 * *fiber as f64 > MAX_CELLS as f64 {
                return Err(too_many(arcs.len() as f64 * *fiber as f64));
            }
            let mut out = Vec::with_capacity(arcs.len() * *fiber as usize);
            for a in arcs {
                let offsets = fiber_offsets(*alpha, *fiber, cocycle, a.mid, times);
                for j in 0..*fiber {
                    out.push((
                        CellState::Circle {
                            mid: a.mid,
                            fibers: offsets.iter().map(|o| (o + j) % fiber).collect(),
                        },
                        a.mass / *fiber as f64,
                    ));
                }
            }
            Ok(out)
        }
        _ => {
            if !req.cuts.is_empty() || req.fiber {
                return Err(kind_error(sys));
            }
            let positions = Arc::new(covered_positions(times, req.window));
            let dist = sys.gapped_distribution(&positions)?;
            Ok(dist
                .into_iter()
                .map(|(symbols, m)| {
                    (
                        CellState::Word {
                            symbols,
                            positions: Arc::clone(&positions),
                        },
                        m,
                    )
                })
                .collect())
        }
    }
}

fn too_many(cells: f64) -> Error {
    Error::Precondition(format!(
        "cell decomposition would need {cells:.3e} cells (limit {MAX_CELLS})"
    ))
}

/// Upper estimate of the number of cells [`build`] produces.
fn estimate(sys: &System, req: &Req, times: &[usize]) -> Result<f64> {
    if req.is_trivial() {
        return Ok(1.0);
    }
    let n_pos = covered_positions(times, req.window).len() as f64;
    Ok(match sys.kind() {
        Kind::Product(cs) => {
            let mut acc = 1.0;
            for (i, c) in cs.iter().enumerate() {
                acc *= estimate(c, &req.component(i), times)?;
            }
            acc
        }
        Kind::Bernoulli { probs, .. } => {
            let support = probs.iter().filter(|&&p| p > 0.0).count() as f64;
            support.powf(n_pos)
        }
        Kind::Markov(m) => (m.states() as f64).powf(n_pos),
        Kind::Substitution(s) => {
            let positions = covered_positions(times, req.window);
            let span = positions.last().map_or(0, |l| l - positions[0] + 1);
            if span > crate::systems::DEFAULT_SPAN_LIMIT {
                return Err(Error::Span {
                    span,
                    limit: crate::systems::DEFAULT_SPAN_LIMIT,
                });
            }
            s.factor_table(span).entries.len() as f64
        }
        Kind::Sturmian { .. } => 2.0 * n_pos + 1.0,
        Kind::Rotation { .. } => (req.cuts.len() * times.len()) as f64 + 1.0,
        Kind::Extension { fiber, cocycle, .. } => {
            let max_t = times.last().copied().unwrap_or(0);
            let arcs = (req.cuts.len() * times.len() + cocycle.cuts().len() * max_t) as f64 + 1.0;
            if req.fiber {
                arcs * *fiber as f64
            } else {
                arcs
            }
        }
    })
}

/// Cell state of a single point, observed at times `0..n`.
pub(crate) fn point_state(sys: &System, req: &Req, x: &Point, n: usize) -> Result<CellState> {
    if req.is_trivial() {
        return Ok(CellState::Trivial);
    }
    match (x, sys.kind()) {
        (Point::Product(ps), Kind::Product(cs)) => Ok(CellState::Product(
            cs.iter()
                .zip(ps)
                .enumerate()
                .map(|(i, (c, p))| point_state(c, &req.component(i), p, n))
                .collect::<Result<_>>()?,
        )),
        (Point::Symbolic(_), _) => {
            let len = n + req.window.max(1) - 1;
            let symbols = sys.symbols(x, len)?.into_owned();
            Ok(CellState::Word {
                symbols,
                positions: Arc::new((0..len).collect()),
            })
        }
        (Point::Circle(z), Kind::Rotation { .. }) => Ok(CellState::Circle {
            mid: *z,
            fibers: Vec::new(),
        }),
        (Point::Extension { base, fiber: j }, Kind::Extension { alpha, fiber, cocycle }) => {
            let fibers = if req.fiber {
                let times: Vec<usize> = (0..n).collect();
                fiber_offsets(*alpha, *fiber, cocycle, *base, &times)
                    .into_iter()
                    .map(|o| (o + j) % fiber)
                    .collect()
            } else {
                Vec::new()
            };
            Ok(CellState::Circle { mid: *base, fibers })
        }
        _ => Err(kind_error(sys)),
    }
}

/// Atom labels of every cell at a fixed list of times.
#[derive(Debug, Clone)]
pub struct CellTable {
    times: Vec<usize>,
    masses: Vec<f64>,
    /// Time-major: `labels[i * cells + c]` is the atom of cell `c` at `times[i]`.
    labels: Vec<u32>,
}

impl CellTable {
    pub fn build(sys: &System, part: &Partition, times: &[usize]) -> Result<Self> {
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return crate::error::invalid("cell table times must be strictly increasing");
        }
        let states = build(sys, &part.req, times)?;
        let n = states.len();
        let mut labels = vec![0u32; n * times.len()];
        for (c, (s, _)) in states.iter().enumerate() {
            for (i, &t) in times.iter().enumerate() {
                labels[i * n + c] = part.atom_at(sys, s, i, t)?;
            }
        }
        Ok(Self {
            times: times.to_vec(),
            masses: states.into_iter().map(|s| s.1).collect(),
            labels,
        })
    }

    /// Upper estimate of the number of cells a table for `times` would have.
    pub fn estimate_cells(sys: &System, part: &Partition, times: &[usize]) -> Result<f64> {
        estimate(sys, &part.req, times)
    }

    pub fn times(&self) -> &[usize] {
        &self.times
    }

    pub fn cells(&self) -> usize {
        self.masses.len()
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn label(&self, i: usize, cell: usize) -> u32 {
        self.labels[i * self.cells() + cell]
    }

    /// Atoms of all cells at `times[i]`.
    pub fn column(&self, i: usize) -> &[u32] {
        let n = self.cells();
        &self.labels[i * n..(i + 1) * n]
    }
}
