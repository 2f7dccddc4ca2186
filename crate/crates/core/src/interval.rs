//! Closed real intervals and interval vectors (boxes).
//!
//! Endpoints are IEEE doubles; infinite endpoints are representable so that
//! constraint ranges such as `[-inf, 7]` can be stored, but arithmetic that
//! would have to evaluate `inf - inf` is rejected instead of producing NaN.
//!
//! Two rounding modes are supported. [`Rounding::Fast`] uses ordinary
//! round-to-nearest floating point. [`Rounding::Outward`] widens every
//! elementary result by one unit in the last place in each direction, which is
//! enough to keep the enclosure property under floating point for the
//! `+`, `-`, `*` operations used here.

use std::fmt;
use std::ops::{Add, Index, Mul, Neg, Sub};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntervalError {
    #[error("empty hull")]
    EmptyHull,
    #[error("indeterminate interval form")]
    Indeterminate,
    #[error("invalid interval [{lo}, {hi}]")]
    Invalid { lo: f64, hi: f64 },
    #[error("interval [{lo}, {hi}] is unbounded")]
    Unbounded { lo: f64, hi: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// Rounding policy for elementary interval operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Rounding {
    #[default]
    Fast,
    Outward,
}

impl Rounding {
    #[inline]
    fn round(self, lo: f64, hi: f64) -> Interval {
        match self {
            Rounding::Fast => Interval { lo, hi },
            Rounding::Outward => Interval {
                lo: lo.next_down(),
                hi: hi.next_up(),
            },
        }
    }
}

/// A closed interval `[lo, hi]` with `lo <= hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self, IntervalError> {
        if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
            return Err(IntervalError::Invalid { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    /// The degenerate interval `[x, x]`.
    pub fn point(x: f64) -> Self {
        assert!(x.is_finite(), "point interval needs a finite value, got {x}");
        Self { lo: x, hi: x }
    }

    pub fn entire() -> Self {
        Self {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    /// Smallest interval containing every value produced by `values`.
    pub fn hull<I: IntoIterator<Item = f64>>(values: I) -> Result<Self, IntervalError> {
        let mut acc: Option<(f64, f64)> = None;
        for v in values {
            if v.is_nan() {
                return Err(IntervalError::Invalid { lo: v, hi: v });
            }
            acc = Some(match acc {
                None => (v, v),
                Some((lo, hi)) => (lo.min(v), hi.max(v)),
            });
        }
        let (lo, hi) = acc.ok_or(IntervalError::EmptyHull)?;
        Interval::new(lo, hi)
    }

    #[inline]
    pub fn lo(&self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> f64 {
        self.hi
    }

    #[inline]
    pub fn inf(&self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn sup(&self) -> f64 {
        self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> Result<f64, IntervalError> {
        if !self.is_finite() {
            return Err(IntervalError::Unbounded {
                lo: self.lo,
                hi: self.hi,
            });
        }
        Ok(0.5 * (self.lo + self.hi))
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn is_subset(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    pub fn try_add(self, rhs: Interval, rounding: Rounding) -> Result<Interval, IntervalError> {
        let lo = self.lo + rhs.lo;
        let hi = self.hi + rhs.hi;
        if lo.is_nan() || hi.is_nan() {
            return Err(IntervalError::Indeterminate);
        }
        Ok(rounding.round(lo, hi))
    }

    pub fn try_sub(self, rhs: Interval, rounding: Rounding) -> Result<Interval, IntervalError> {
        self.try_add(-rhs, rounding)
    }

    pub fn try_mul(self, rhs: Interval, rounding: Rounding) -> Result<Interval, IntervalError> {
        let p = [
            mul_ext(self.lo, rhs.lo),
            mul_ext(self.lo, rhs.hi),
            mul_ext(self.hi, rhs.lo),
            mul_ext(self.hi, rhs.hi),
        ];
        let lo = p.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(rounding.round(lo, hi))
    }

    /// `s * self` for a real scalar `s`.
    pub fn scale(self, s: f64, rounding: Rounding) -> Interval {
        let a = mul_ext(s, self.lo);
        let b = mul_ext(s, self.hi);
        rounding.round(a.min(b), a.max(b))
    }

    /// `self + s` for a real scalar `s`.
    pub fn shift(self, s: f64, rounding: Rounding) -> Result<Interval, IntervalError> {
        self.try_add(Interval { lo: s, hi: s }, rounding)
    }
}

// Extended-real product with the interval convention 0 * inf = 0.
#[inline]
fn mul_ext(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}

impl Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }
}

// The operator forms use fast rounding and panic on `inf - inf`; use the
// `try_*` methods when operands may be unbounded.
impl Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        self.try_add(rhs, Rounding::Fast).expect("indeterminate interval form")
    }
}

impl Sub for Interval {
    type Output = Interval;
    fn sub(self, rhs: Interval) -> Interval {
        self.try_sub(rhs, Rounding::Fast).expect("indeterminate interval form")
    }
}

impl Mul for Interval {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        self.try_mul(rhs, Rounding::Fast).expect("indeterminate interval form")
    }
}

impl Mul<Interval> for f64 {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        rhs.scale(self, Rounding::Fast)
    }
}

impl From<[f64; 2]> for Interval {
    /// Panics on an inverted pair.
    fn from(v: [f64; 2]) -> Self {
        Interval::new(v[0], v[1]).expect("invalid interval literal")
    }
}

/// An interval vector.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxVec(Vec<Interval>);

impl BoxVec {
    pub fn new(comps: Vec<Interval>) -> Self {
        BoxVec(comps)
    }

    pub fn from_bounds(lo: &[f64], hi: &[f64]) -> Result<Self, IntervalError> {
        if lo.len() != hi.len() {
            return Err(IntervalError::Dimension {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        lo.iter()
            .zip(hi)
            .map(|(&l, &h)| Interval::new(l, h))
            .collect::<Result<Vec<_>, _>>()
            .map(BoxVec)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Interval> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[Interval] {
        &self.0
    }

    pub fn lo(&self) -> Vec<f64> {
        self.0.iter().map(Interval::lo).collect()
    }

    pub fn hi(&self) -> Vec<f64> {
        self.0.iter().map(Interval::hi).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.0.iter().map(Interval::width).collect()
    }

    pub fn mid(&self) -> Result<Vec<f64>, IntervalError> {
        self.0.iter().map(Interval::mid).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(Interval::is_finite)
    }

    pub fn volume(&self) -> f64 {
        self.0.iter().map(Interval::width).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && self.0.iter().zip(x).all(|(c, &xi)| c.contains(xi))
    }

    pub fn is_subset(&self, other: &BoxVec) -> bool {
        self.dim() == other.dim() && self.0.iter().zip(&other.0).all(|(a, b)| a.is_subset(b))
    }

    /// Index of the widest component (first one on ties).
    pub fn widest(&self) -> usize {
        let mut best = 0;
        for (i, c) in self.0.iter().enumerate() {
            if c.width() > self.0[best].width() {
                best = i;
            }
        }
        best
    }

    /// Splits at the midpoint of component `k`.
    pub fn bisect(&self, k: usize) -> Result<(BoxVec, BoxVec), IntervalError> {
        let c = self.0[k];
        let m = c.mid()?;
        let mut left = self.clone();
        let mut right = self.clone();
        left.0[k] = Interval::new(c.lo, m)?;
        right.0[k] = Interval::new(m, c.hi)?;
        Ok((left, right))
    }

    pub fn with_component(&self, k: usize, comp: Interval) -> BoxVec {
        let mut b = self.clone();
        b.0[k] = comp;
        b
    }
}

impl Index<usize> for BoxVec {
    type Output = Interval;
    fn index(&self, i: usize) -> &Interval {
        &self.0[i]
    }
}

impl fmt::Display for BoxVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("x")?;
            }
            write!(f, "[{},{}]", c.lo, c.hi)?;
        }
        Ok(())
    }
}

impl std::str::FromStr for BoxVec {
    type Err = String;

    /// Parses the display form `[a,b]x[c,d]`; `inf` and `-inf` are accepted.
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let body = s
            .strip_prefix('[')
            .and_then(|t| t.strip_suffix(']'))
            .ok_or_else(|| format!("expected [lo,hi]x...: '{s}'"))?;
        body.split("]x[")
            .map(|comp| {
                let (a, b) = comp
                    .split_once(',')
                    .ok_or_else(|| format!("expected lo,hi in '{comp}'"))?;
                let lo: f64 = a.trim().parse().map_err(|_| format!("bad number '{a}'"))?;
                let hi: f64 = b.trim().parse().map_err(|_| format!("bad number '{b}'"))?;
                Interval::new(lo, hi).map_err(|e| e.to_string())
            })
            .collect()
    }
}

impl FromIterator<Interval> for BoxVec {
    fn from_iter<T: IntoIterator<Item = Interval>>(iter: T) -> Self {
        BoxVec(iter.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi).unwrap()
    }

    #[test]
    fn hull_of_finite_sets() {
        assert_eq!(Interval::hull([1.0, -2.0, 3.0]).unwrap(), iv(-2.0, 3.0));
        assert_eq!(Interval::hull([5.0]).unwrap(), iv(5.0, 5.0));
        assert_eq!(Interval::hull(std::iter::empty()), Err(IntervalError::EmptyHull));
    }

    #[test]
    fn hull_of_square_over_grid() {
        // t^2 sampled densely over [-1, 2]; the grid hits 0 and 2 exactly.
        let h = Interval::hull((0..=3000).map(|i| {
            let t = -1.0 + i as f64 * 1e-3;
            t * t
        }))
        .unwrap();
        assert!(h.lo().abs() < 1e-12);
        assert!((h.hi() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn elementary_ops() {
        assert_eq!(iv(-1.0, 2.0) * iv(0.0, 3.0), iv(-3.0, 6.0));
        assert_eq!(iv(1.0, 2.0) + iv(-4.0, -1.0), iv(-3.0, 1.0));
        assert_eq!(iv(1.0, 2.0) - iv(-4.0, -1.0), iv(2.0, 6.0));
        assert_eq!(2.0 * iv(-1.0, 3.0), iv(-2.0, 6.0));
        assert_eq!(iv(-1.0, 3.0).scale(-2.0, Rounding::Fast), iv(-6.0, 2.0));
    }

    #[test]
    fn product_against_grid() {
        let a = iv(-1.5, 0.0);
        let b = iv(0.0, 3.0);
        let p = a * b;
        assert_eq!(p, iv(-4.5, 0.0));
        let sampled = Interval::hull(
            (0..=60).flat_map(|i| (0..=60).map(move |j| (-1.5 + 1.5 * i as f64 / 60.0) * (3.0 * j as f64 / 60.0))),
        )
        .unwrap();
        assert_eq!(sampled, p);
    }

    #[test]
    fn infinite_endpoints() {
        let f = iv(f64::NEG_INFINITY, 7.0);
        assert_eq!(
            f.try_add(iv(1.0, f64::INFINITY), Rounding::Fast).unwrap(),
            Interval::entire()
        );
        assert_eq!(
            f.try_add(iv(1.0, 2.0), Rounding::Fast).unwrap(),
            iv(f64::NEG_INFINITY, 9.0)
        );
        // 0 * inf is taken as 0
        assert_eq!(
            iv(0.0, 0.0).try_mul(Interval::entire(), Rounding::Fast).unwrap(),
            iv(0.0, 0.0)
        );
        assert!(f.mid().is_err());
    }

    #[test]
    fn accessors() {
        assert_eq!(iv(-1.0, 2.0).mid().unwrap(), 0.5);
        assert!(iv(-2.0, 0.0).contains(0.0));
        assert!(!iv(-2.0, 0.0).contains(0.1));
        assert_eq!(iv(-3.0, 3.0).width(), 6.0);
        assert!(Interval::new(2.0, 1.0).is_err());
        assert!(Interval::new(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn outward_rounding_widens() {
        let a = iv(0.1, 0.2);
        let b = iv(0.3, 0.7);
        let fast = a.try_add(b, Rounding::Fast).unwrap();
        let out = a.try_add(b, Rounding::Outward).unwrap();
        assert!(out.lo() < fast.lo() && out.hi() > fast.hi());
        assert!(fast.is_subset(&out));
    }

    #[test]
    fn box_helpers() {
        let b = BoxVec::from_bounds(&[0.0, 1.0], &[3.0, 2.0]).unwrap();
        assert_eq!(b.volume(), 3.0);
        assert_eq!(b.widest(), 0);
        let (l, r) = b.bisect(0).unwrap();
        assert_eq!(l[0], iv(0.0, 1.5));
        assert_eq!(r[0], iv(1.5, 3.0));
        assert!(l.is_subset(&b));
        assert!(b.contains(&[0.0, 2.0]));
        assert_eq!(b.to_string(), "[0,3]x[1,2]");
    }

    fn interval_strategy() -> impl Strategy<Value = Interval> {
        (-10.0..10.0f64, 0.0..5.0f64).prop_map(|(lo, w)| Interval::new(lo, lo + w).unwrap())
    }

    #[derive(Debug, Clone, Copy)]
    enum Op {
        Add,
        Sub,
        Mul,
    }

    fn apply(op: Op, a: Interval, b: Interval, r: Rounding) -> Interval {
        match op {
            Op::Add => a.try_add(b, r).unwrap(),
            Op::Sub => a.try_sub(b, r).unwrap(),
            Op::Mul => a.try_mul(b, r).unwrap(),
        }
    }

    fn apply_real(op: Op, x: f64, y: f64) -> f64 {
        match op {
            Op::Add => x + y,
            Op::Sub => x - y,
            Op::Mul => x * y,
        }
    }

    fn op_strategy() -> impl Strategy<Value = Op> {
        prop_oneof![Just(Op::Add), Just(Op::Sub), Just(Op::Mul)]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn single_op_encloses_point_results(
            a in interval_strategy(), b in interval_strategy(), op in op_strategy(),
            s in 0.0..=1.0f64, t in 0.0..=1.0f64,
        ) {
            let x = a.lo() + s * a.width();
            let y = b.lo() + t * b.width();
            let x = x.clamp(a.lo(), a.hi());
            let y = y.clamp(b.lo(), b.hi());
            let v = apply_real(op, x, y);
            prop_assert!(apply(op, a, b, Rounding::Outward).contains(v));
        }

        #[test]
        fn monotone_under_inclusion(
            a in interval_strategy(), b in interval_strategy(), op in op_strategy(),
            ea in 0.0..2.0f64, eb in 0.0..2.0f64,
        ) {
            let a2 = Interval::new(a.lo() - ea, a.hi() + ea).unwrap();
            let b2 = Interval::new(b.lo() - eb, b.hi() + eb).unwrap();
            let inner = apply(op, a, b, Rounding::Fast);
            let outer = apply(op, a2, b2, Rounding::Fast);
            prop_assert!(inner.is_subset(&outer));
        }

        #[test]
        fn composed_expression_encloses(
            ivs in prop::collection::vec(interval_strategy(), 4),
            ops in prop::collection::vec(op_strategy(), 3),
            ts in prop::collection::vec(0.0..=1.0f64, 4),
        ) {
            // ((a0 op0 a1) op1 a2) op2 a3 evaluated both ways
            let pts: Vec<f64> = ivs
                .iter()
                .zip(&ts)
                .map(|(i, t)| (i.lo() + t * i.width()).clamp(i.lo(), i.hi()))
                .collect();
            let mut acc_i = ivs[0];
            let mut acc_x = pts[0];
            for k in 0..3 {
                acc_i = apply(ops[k], acc_i, ivs[k + 1], Rounding::Outward);
                acc_x = apply_real(ops[k], acc_x, pts[k + 1]);
            }
            prop_assert!(acc_i.contains(acc_x));
        }
    }
}
