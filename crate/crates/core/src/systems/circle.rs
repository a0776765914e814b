//! The circle `R/Z` in 64-bit fixed point.
//!
//! A [`Phase`] `v` stands for the point `v / 2^64`. Rotation is wrapping
//! addition, so orbits are exact and rotations are exact isometries.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const SCALE: f64 = 18446744073709551616.0; // 2^64

/// Points closer than this (1e-12 of the circle) are merged when arranging arcs.
pub const DEDUP_TOL: u64 = 18_446_744; // floor(1e-12 * 2^64)

/// Largest denominator the irrationality check looks at.
pub const MAX_DENOMINATOR: u64 = 1000;
/// Distance to a small-denominator rational below which a number counts as rational.
pub const RATIONAL_TOL: f64 = 1e-12;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Phase(pub u64);

impl Phase {
    pub const ZERO: Phase = Phase(0);

    /// Nearest fixed-point value to `x mod 1`.
    pub fn from_f64(x: f64) -> Phase {
        let f = x - x.floor();
        let v = (f * SCALE).round();
        if v >= SCALE {
            Phase(0)
        } else {
            Phase(v as u64)
        }
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / SCALE
    }

    /// Parses a decimal string such as `"0.61803398874989484820"` at full
    /// precision (rounded to 2^-64). Only the fractional part is kept.
    pub fn parse_decimal(s: &str) -> Result<Phase> {
        let t = s.trim();
        let (neg, body) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t.strip_prefix('+').unwrap_or(t)),
        };
        let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
        let valid = |p: &str| p.chars().all(|c| c.is_ascii_digit());
        if body.is_empty() || !valid(int_part) || !valid(frac_part) {
            return invalid(format!("`{s}` is not a decimal number"));
        }
        // Horner's rule from the last digit, in 64.64 fixed point. Each step
        // truncates below 2^-128, far under the 2^-64 resolution kept.
        const TENTH: u128 = u128::MAX / 10;
        let mut r: u128 = 0;
        for b in frac_part.bytes().rev() {
            let d = (b - b'0') as u128;
            r = d * TENTH + d * 6 / 10 + r / 10;
        }
        // Round to nearest; a carry out of the top wraps to 0 mod 1.
        let v = (r.checked_add(1 << 63).unwrap_or(0) >> 64) as u64;
        let p = Phase(v);
        Ok(if neg { Phase(0).minus(p) } else { p })
    }

    #[inline]
    pub fn plus(self, other: Phase) -> Phase {
        Phase(self.0.wrapping_add(other.0))
    }

    #[inline]
    pub fn minus(self, other: Phase) -> Phase {
        Phase(self.0.wrapping_sub(other.0))
    }

    /// Exact decimal expansion of `v / 2^64` (at most 64 digits).
    pub fn to_decimal(self) -> String {
        let mut out = String::from("0.");
        let mut frac = self.0 as u128;
        if frac == 0 {
            out.push('0');
            return out;
        }
        while frac != 0 {
            frac *= 10;
            out.push((b'0' + (frac >> 64) as u8) as char);
            frac &= u64::MAX as u128;
        }
        out
    }

    /// `self * t` on the circle, i.e. the `t`-fold sum.
    #[inline]
    pub fn times(self, t: u64) -> Phase {
        Phase(self.0.wrapping_mul(t))
    }

    /// Arc-length distance `min(|x - y|, 1 - |x - y|)`.
    pub fn arc_distance(self, other: Phase) -> f64 {
        let d = self.0.wrapping_sub(other.0);
        d.min(d.wrapping_neg()) as f64 / SCALE
    }
}

impl fmt::Debug for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Phase({:.17})", self.to_f64())
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.17}", self.to_f64())
    }
}

impl Serialize for Phase {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_decimal())
    }
}

impl<'de> Deserialize<'de> for Phase {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Number(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Text(t) => Phase::parse_decimal(&t).map_err(serde::de::Error::custom),
            Raw::Number(x) => Ok(Phase::from_f64(x)),
        }
    }
}

/// Partial quotients of the continued fraction of `v / 2^64` (exact).
pub fn continued_fraction(p: Phase) -> Vec<u128> {
    let mut a: u128 = p.0 as u128;
    let mut b: u128 = 1u128 << 64;
    let mut out = vec![0];
    while a != 0 {
        out.push(b / a);
        let r = b % a;
        b = a;
        a = r;
    }
    out
}

/// Rejects phases within [`RATIONAL_TOL`] of a rational with denominator at most
/// [`MAX_DENOMINATOR`]. Any such rational is a convergent, so only the
/// convergents of the continued fraction need checking.
pub fn check_irrational(alpha: Phase) -> Result<()> {
    let cf = continued_fraction(alpha);
    let x = alpha.to_f64();
    let (mut p_prev, mut q_prev): (u128, u128) = (1, 0);
    let (mut p, mut q): (u128, u128) = (cf[0], 1);
    let mut i = 0;
    loop {
        if q > MAX_DENOMINATOR as u128 {
            return Ok(());
        }
        let err = (x - p as f64 / q as f64).abs();
        if err < RATIONAL_TOL {
            let shown: Vec<String> = cf.iter().take(i + 4).map(|a| a.to_string()).collect();
            return Err(Error::Validation(format!(
                "rotation number {x:.17} is within {err:.1e} of {p}/{q}; continued fraction [{}{}] \
                 has a convergent with denominator <= {MAX_DENOMINATOR}",
                shown.join("; "),
                if cf.len() > i + 4 { "; ..." } else { "" }
            )));
        }
        i += 1;
        let Some(&a) = cf.get(i) else {
            // Expansion terminated: x is exactly p/q with q > the bound checked above.
            return Ok(());
        };
        let (np, nq) = (a * p + p_prev, a * q + q_prev);
        p_prev = p;
        q_prev = q;
        p = np;
        q = nq;
    }
}

/// One arc `[start, start + len)` of an arrangement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    pub start: Phase,
    pub mid: Phase,
    pub mass: f64,
}

/// Cuts the circle at `points` and returns the arcs in increasing order of
/// start. Points within [`DEDUP_TOL`] of each other (cyclically) are merged.
pub fn arrangement(mut points: Vec<Phase>) -> Vec<Arc> {
    points.sort_unstable();
    points.dedup();
    let mut kept: Vec<Phase> = Vec::with_capacity(points.len());
    for p in points {
        match kept.last() {
            Some(last) if p.0 - last.0 <= DEDUP_TOL => {}
            _ => kept.push(p),
        }
    }
    while kept.len() > 1 {
        let first = kept[0];
        let last = *kept.last().unwrap();
        if first.0.wrapping_sub(last.0) <= DEDUP_TOL {
            kept.pop();
        } else {
            break;
        }
    }
    if kept.len() <= 1 {
        let start = kept.first().copied().unwrap_or(Phase::ZERO);
        return vec![Arc {
            start,
            mid: start.plus(Phase(1 << 63)),
            mass: 1.0,
        }];
    }
    let n = kept.len();
    (0..n)
        .map(|i| {
            let start = kept[i];
            let len = kept[(i + 1) % n].0.wrapping_sub(start.0);
            Arc {
                start,
                mid: Phase(start.0.wrapping_add(len / 2)),
                mass: len as f64 / SCALE,
            }
        })
        .collect()
}

/// A labeling of the circle by finitely many arcs: arc `i` is
/// `[cuts[i], cuts[i+1])`, the last one wrapping around to `cuts[0]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArcLabeling {
    cuts: Vec<Phase>,
    labels: Vec<u32>,
}

impl ArcLabeling {
    pub fn new(cuts: Vec<Phase>, labels: Vec<u32>) -> Result<Self> {
        if cuts.is_empty() || cuts.len() != labels.len() {
            return invalid("arc labeling needs one label per cut point and at least one cut");
        }
        if cuts.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("arc cut points must be strictly increasing in [0, 1)");
        }
        Ok(Self { cuts, labels })
    }

    /// Two arcs `[0, c)` labelled 0 and `[c, 1)` labelled 1.
    pub fn two_arcs(c: Phase) -> Result<Self> {
        if c.0 == 0 {
            return invalid("cut point must lie strictly inside (0, 1)");
        }
        Self::new(vec![Phase::ZERO, c], vec![0, 1])
    }

    pub fn cuts(&self) -> &[Phase] {
        &self.cuts
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label_at(&self, x: Phase) -> u32 {
        match self.cuts.binary_search(&x) {
            Ok(i) => self.labels[i],
            Err(0) => *self.labels.last().unwrap(),
            Err(i) => self.labels[i - 1],
        }
    }

    /// Relabels arcs through `f`.
    pub fn map_labels(&self, f: impl Fn(u32) -> u32) -> Self {
        Self {
            cuts: self.cuts.clone(),
            labels: self.labels.iter().map(|&l| f(l)).collect(),
        }
    }
}

/// `(sqrt 5 - 1) / 2` to 40 digits.
pub const GOLDEN_DECIMAL: &str = "0.6180339887498948482045868343656381177203";

pub fn golden() -> Phase {
    Phase::parse_decimal(GOLDEN_DECIMAL).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_matches_f64() {
        for s in ["0.5", "0.25", "0.1", "0.618034", "0.999999999"] {
            let p = Phase::parse_decimal(s).unwrap();
            let x: f64 = s.parse().unwrap();
            assert!((p.to_f64() - x).abs() < 1e-16, "{s}");
        }
        assert_eq!(Phase::parse_decimal("0.5").unwrap(), Phase(1 << 63));
        assert_eq!(Phase::parse_decimal("3.25").unwrap(), Phase(1 << 62));
        assert_eq!(Phase::parse_decimal("-0.25").unwrap(), Phase(3 << 62));
        assert!(Phase::parse_decimal("abc").is_err());
        assert!(Phase::parse_decimal("0.1e3").is_err());
    }

    #[test]
    fn decimal_round_trip() {
        for v in [0u64, 1, 1 << 63, 12345678901234567890, u64::MAX] {
            let p = Phase(v);
            assert_eq!(Phase::parse_decimal(&p.to_decimal()).unwrap(), p);
        }
        let g = golden();
        assert_eq!(Phase::parse_decimal(&g.to_decimal()).unwrap(), g);
    }

    #[test]
    fn arc_distance_wraps() {
        let x = Phase::from_f64(0.1);
        let y = Phase::from_f64(0.95);
        assert!((x.arc_distance(y) - 0.15).abs() < 1e-15);
    }

    #[test]
    fn rotation_is_exact_isometry() {
        let a = golden();
        let x = Phase::from_f64(0.3);
        let y = Phase::from_f64(0.305);
        let d = x.arc_distance(y);
        for k in [1u64, 7, 1000, 123_456_789] {
            let s = a.times(k);
            assert_eq!(x.plus(s).arc_distance(y.plus(s)), d);
        }
    }

    #[test]
    fn golden_is_irrational_and_halves_are_not() {
        assert!(check_irrational(golden()).is_ok());
        assert!(check_irrational(Phase::from_f64(2f64.sqrt() - 1.0)).is_ok());
        let err = check_irrational(Phase::parse_decimal("0.5").unwrap()).unwrap_err();
        assert!(format!("{err}").contains("continued fraction"));
        assert!(check_irrational(Phase::from_f64(355.0 / 997.0)).is_err());
        assert!(check_irrational(Phase::from_f64(1.0 / 3.0 + 1e-14)).is_err());
        assert!(check_irrational(Phase::ZERO).is_err());
        // A rational with a large denominator passes.
        assert!(check_irrational(Phase::from_f64(1.0 / 1009.0)).is_ok());
    }

    #[test]
    fn arrangement_of_four_endpoints() {
        let a = golden();
        let half = Phase(1 << 63);
        let pts = vec![Phase::ZERO, half, Phase::ZERO.minus(a), half.minus(a)];
        let arcs = arrangement(pts);
        assert_eq!(arcs.len(), 4);
        let total: f64 = arcs.iter().map(|a| a.mass).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn arrangement_dedups_close_points() {
        let arcs = arrangement(vec![Phase(5), Phase(10), Phase(u64::MAX - 3)]);
        assert_eq!(arcs.len(), 1);
        assert_eq!(arcs[0].mass, 1.0);
        let arcs = arrangement(vec![]);
        assert_eq!(arcs.len(), 1);
    }

    #[test]
    fn labeling_lookup() {
        let lab = ArcLabeling::two_arcs(Phase(1 << 63)).unwrap();
        assert_eq!(lab.label_at(Phase::ZERO), 0);
        assert_eq!(lab.label_at(Phase((1 << 63) - 1)), 0);
        assert_eq!(lab.label_at(Phase(1 << 63)), 1);
        assert_eq!(lab.label_at(Phase(u64::MAX)), 1);
        let shifted = ArcLabeling::new(vec![Phase(10), Phase(20)], vec![3, 4]).unwrap();
        assert_eq!(shifted.label_at(Phase(5)), 4);
        assert_eq!(shifted.label_at(Phase(15)), 3);
    }
}
