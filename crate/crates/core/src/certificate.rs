//! The infeasibility certificate `f = (Z - max(0, Y)) / T` for quadratic
//! constraints.
//!
//! * `Z` is the upper end of the interval evaluation of
//!   `(c(y,z)^T + (x - z)^T A(y,R,S)) (x - z)` over the box `[u, v]`; it bounds
//!   `y^T (F(x) - F(z))` from above on the box.
//! * `Y` is `inf y^T (F - F(z))` over the range box, in closed form.
//! * `T` is either `1` or `|y|_2`.
//!
//! A strictly negative value proves that `[u, v]` holds no feasible point.
//! Subgradients are obtained by differentiating the branch selections made
//! by the evaluation itself (endpoint products achieving each min/max and the
//! active side of `max(0, Y)`).

use nalgebra::DMatrix;
use thiserror::Error;

use crate::interval::{BoxVec, Interval, IntervalError, Rounding};
use crate::model::QuadraticCsp;

pub const DEFAULT_EPS_ZERO: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertError {
    #[error("denominator zero set: |y| = {norm} is below {eps}")]
    ZeroDenominator { norm: f64, eps: f64 },
    #[error("{what}: expected length {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error(transparent)]
    Interval(#[from] IntervalError),
}

/// Denominator of the certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TVariant {
    One,
    NormY,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TChoice {
    pub variant: TVariant,
    /// `|y|` below this is treated as the zero set of `T = |y|`.
    pub eps_zero: f64,
}

impl TChoice {
    pub fn one() -> Self {
        Self {
            variant: TVariant::One,
            eps_zero: DEFAULT_EPS_ZERO,
        }
    }

    pub fn norm_y() -> Self {
        Self {
            variant: TVariant::NormY,
            eps_zero: DEFAULT_EPS_ZERO,
        }
    }

    pub fn value(&self, y: &[f64]) -> Result<f64, CertError> {
        match self.variant {
            TVariant::One => Ok(1.0),
            TVariant::NormY => {
                let norm = norm2(y);
                if norm < self.eps_zero {
                    Err(CertError::ZeroDenominator {
                        norm,
                        eps: self.eps_zero,
                    })
                } else {
                    Ok(norm)
                }
            }
        }
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Which variable blocks an optimizer may move.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockMask {
    pub y: bool,
    pub z: bool,
    /// The augmentation matrices `R` and `S` together.
    pub w: bool,
    pub u: bool,
    pub v: bool,
}

impl BlockMask {
    pub const ALL: BlockMask = BlockMask {
        y: true,
        z: true,
        w: true,
        u: true,
        v: true,
    };

    pub fn fixed_box() -> Self {
        BlockMask {
            y: true,
            z: true,
            w: false,
            u: false,
            v: false,
        }
    }

    pub fn variable_box() -> Self {
        BlockMask {
            u: true,
            v: true,
            ..Self::fixed_box()
        }
    }
}

/// Arguments of the certificate: multipliers `y`, center `z`, upper
/// triangular `R`, strictly upper triangular `S` and the box `[u, v]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CertPoint {
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub r: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl CertPoint {
    /// `R = S = 0`.
    pub fn new(y: Vec<f64>, z: Vec<f64>, u: Vec<f64>, v: Vec<f64>) -> Self {
        let n = z.len();
        Self {
            y,
            z,
            r: DMatrix::zeros(n, n),
            s: DMatrix::zeros(n, n),
            u,
            v,
        }
    }

    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn box_vec(&self) -> Result<BoxVec, IntervalError> {
        BoxVec::from_bounds(&self.u, &self.v)
    }

    /// Flat length of the masked blocks.
    pub fn packed_len(&self, mask: BlockMask) -> usize {
        let n = self.n();
        let mut len = 0;
        if mask.y {
            len += self.y.len();
        }
        if mask.z {
            len += n;
        }
        if mask.w {
            len += n * n;
        }
        if mask.u {
            len += n;
        }
        if mask.v {
            len += n;
        }
        len
    }

    /// Flattens the masked blocks in the order `y, z, R, S, u, v`; `R` and `S`
    /// contribute their upper (resp. strictly upper) entries row by row.
    pub fn pack(&self, mask: BlockMask) -> Vec<f64> {
        let n = self.n();
        let mut out = Vec::with_capacity(self.packed_len(mask));
        if mask.y {
            out.extend_from_slice(&self.y);
        }
        if mask.z {
            out.extend_from_slice(&self.z);
        }
        if mask.w {
            for i in 0..n {
                for j in i..n {
                    out.push(self.r[(i, j)]);
                }
            }
            for i in 0..n {
                for j in i + 1..n {
                    out.push(self.s[(i, j)]);
                }
            }
        }
        if mask.u {
            out.extend_from_slice(&self.u);
        }
        if mask.v {
            out.extend_from_slice(&self.v);
        }
        out
    }

    /// Inverse of [`CertPoint::pack`]; blocks outside the mask are kept.
    pub fn unpack(&mut self, mask: BlockMask, x: &[f64]) {
        let n = self.n();
        let mut it = x.iter().copied();
        let mut fill = |dst: &mut [f64]| {
            for d in dst {
                *d = it.next().expect("packed vector too short");
            }
        };
        if mask.y {
            fill(&mut self.y);
        }
        if mask.z {
            fill(&mut self.z);
        }
        if mask.w {
            let mut buf = vec![0.0; n * n];
            fill(&mut buf);
            let mut p = 0;
            for i in 0..n {
                for j in i..n {
                    self.r[(i, j)] = buf[p];
                    p += 1;
                }
            }
            for i in 0..n {
                for j in i + 1..n {
                    self.s[(i, j)] = buf[p];
                    p += 1;
                }
            }
        }
        if mask.u {
            fill(&mut self.u);
        }
        if mask.v {
            fill(&mut self.v);
        }
    }
}

/// Value of the certificate and its parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertValue {
    /// `+inf` when `Y = -inf`.
    pub f: f64,
    pub z: f64,
    pub y: f64,
    pub t: f64,
}

/// Subgradient of `f`, block by block.
#[derive(Debug, Clone, PartialEq)]
pub struct CertGradient {
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub r: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl CertGradient {
    pub fn pack(&self, mask: BlockMask) -> Vec<f64> {
        CertPoint {
            y: self.y.clone(),
            z: self.z.clone(),
            r: self.r.clone(),
            s: self.s.clone(),
            u: self.u.clone(),
            v: self.v.clone(),
        }
        .pack(mask)
    }
}

/// `C(y) = sum_k y_k C_k`.
pub fn c_matrix(csp: &QuadraticCsp, y: &[f64]) -> DMatrix<f64> {
    let n = csp.n();
    let mut out = DMatrix::zeros(n, n);
    for (k, &yk) in y.iter().enumerate() {
        if yk != 0.0 {
            out += csp.quad(k) * yk;
        }
    }
    out
}

/// `c(y, z) = sum_k y_k c_k + (C(y) + C(y)^T) z`.
pub fn c_vector(csp: &QuadraticCsp, y: &[f64], z: &[f64]) -> Vec<f64> {
    let n = csp.n();
    let cy = c_matrix(csp, y);
    (0..n)
        .map(|i| {
            let mut s = 0.0;
            for (k, &yk) in y.iter().enumerate() {
                s += yk * csp.linear(k)[i];
            }
            for l in 0..n {
                s += (cy[(i, l)] + cy[(l, i)]) * z[l];
            }
            s
        })
        .collect()
}

/// `A(y, R, S) = C(y) + R^T R + S^T - S`.
pub fn a_matrix(csp: &QuadraticCsp, y: &[f64], r: &DMatrix<f64>, s: &DMatrix<f64>) -> DMatrix<f64> {
    c_matrix(csp, y) + r.transpose() * r + s.transpose() - s
}

/// Outward-rounded enclosures of `c(y, z)` and `A(y, R, S)`.
fn coefficient_enclosures(
    csp: &QuadraticCsp,
    y: &[f64],
    z: &[f64],
    r: &DMatrix<f64>,
    s: &DMatrix<f64>,
) -> Result<(Vec<Interval>, Vec<Vec<Interval>>), IntervalError> {
    let rd = Rounding::Outward;
    let n = csp.n();
    let zero = Interval::point(0.0);
    let mut cy = vec![vec![zero; n]; n];
    for (k, &yk) in y.iter().enumerate() {
        let q = csp.quad(k);
        for i in 0..n {
            for j in 0..n {
                cy[i][j] = cy[i][j].try_add(Interval::point(q[(i, j)]).scale(yk, rd), rd)?;
            }
        }
    }
    let mut cvec = Vec::with_capacity(n);
    for i in 0..n {
        let mut acc = zero;
        for (k, &yk) in y.iter().enumerate() {
            acc = acc.try_add(Interval::point(csp.linear(k)[i]).scale(yk, rd), rd)?;
        }
        for l in 0..n {
            let sym = cy[i][l].try_add(cy[l][i], rd)?;
            acc = acc.try_add(sym.scale(z[l], rd), rd)?;
        }
        cvec.push(acc);
    }
    let mut amat = vec![vec![zero; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = cy[i][j];
            for p in 0..n {
                acc = acc.try_add(Interval::point(r[(p, i)]).scale(r[(p, j)], rd), rd)?;
            }
            acc = acc.try_add(Interval::point(s[(j, i)]), rd)?;
            acc = acc.try_sub(Interval::point(s[(i, j)]), rd)?;
            amat[i][j] = acc;
        }
    }
    Ok((cvec, amat))
}

/// Upper end of the interval evaluation of
/// `(c^T + (x - z)^T A)(x - z)` over `bx`, evaluated row by row.
fn z_from_coefficients(
    cvec: &[Interval],
    amat: &[Vec<Interval>],
    z: &[f64],
    bx: &BoxVec,
    rounding: Rounding,
) -> Result<f64, IntervalError> {
    let n = z.len();
    let d: Vec<Interval> = (0..n)
        .map(|j| bx[j].try_sub(Interval::point(z[j]), rounding))
        .collect::<Result<_, _>>()?;
    let mut total = Interval::point(0.0);
    for i in 0..n {
        let mut row = cvec[i];
        for j in 0..n {
            row = row.try_add(d[j].try_mul(amat[j][i], rounding)?, rounding)?;
        }
        total = total.try_add(row.try_mul(d[i], rounding)?, rounding)?;
    }
    Ok(total.sup())
}

fn check_dims(csp: &QuadraticCsp, y: &[f64], z: &[f64]) -> Result<(), CertError> {
    if y.len() != csp.m() {
        return Err(CertError::Dimension {
            what: "y",
            expected: csp.m(),
            got: y.len(),
        });
    }
    if z.len() != csp.n() {
        return Err(CertError::Dimension {
            what: "z",
            expected: csp.n(),
            got: z.len(),
        });
    }
    Ok(())
}

/// `Z(y, z, R, S)` over `bx`.
pub fn z_value(
    csp: &QuadraticCsp,
    y: &[f64],
    z: &[f64],
    r: &DMatrix<f64>,
    s: &DMatrix<f64>,
    bx: &BoxVec,
    rounding: Rounding,
) -> Result<f64, CertError> {
    check_dims(csp, y, z)?;
    let (cvec, amat) = match rounding {
        Rounding::Fast => {
            let c = c_vector(csp, y, z);
            let a = a_matrix(csp, y, r, s);
            let n = csp.n();
            (
                c.into_iter().map(Interval::point).collect::<Vec<_>>(),
                (0..n)
                    .map(|i| (0..n).map(|j| Interval::point(a[(i, j)])).collect())
                    .collect::<Vec<Vec<_>>>(),
            )
        }
        Rounding::Outward => coefficient_enclosures(csp, y, z, r, s)?,
    };
    Ok(z_from_coefficients(&cvec, &amat, z, bx, rounding)?)
}

/// `Y(y, z) = inf y^T (F - F(z))`; `-inf` when an infinite range bound meets a
/// multiplier of the matching sign. Under outward rounding the result is a
/// lower bound of the exact value.
pub fn y_value(csp: &QuadraticCsp, y: &[f64], z: &[f64], rounding: Rounding) -> Result<f64, CertError> {
    check_dims(csp, y, z)?;
    let mut acc = Interval::point(0.0);
    for (k, &yk) in y.iter().enumerate() {
        if yk == 0.0 {
            continue;
        }
        let range = csp.range(k);
        let bound = if yk > 0.0 { range.lo() } else { range.hi() };
        if !bound.is_finite() {
            return Ok(f64::NEG_INFINITY);
        }
        let fz = match rounding {
            Rounding::Fast => Interval::point(csp.eval_k(k, z)),
            Rounding::Outward => {
                let pt: BoxVec = z.iter().map(|&v| Interval::point(v)).collect();
                csp.eval_k_interval(k, &pt, rounding)?
            }
        };
        let gap = Interval::point(bound).try_sub(fz, rounding)?;
        acc = acc.try_add(gap.scale(yk, rounding), rounding)?;
    }
    Ok(acc.inf())
}

/// Evaluates the certificate for one problem with a fixed denominator and
/// rounding policy.
#[derive(Debug, Clone, Copy)]
pub struct Certificate<'a> {
    csp: &'a QuadraticCsp,
    t: TChoice,
    rounding: Rounding,
}

impl<'a> Certificate<'a> {
    pub fn new(csp: &'a QuadraticCsp, t: TChoice) -> Self {
        Self {
            csp,
            t,
            rounding: Rounding::Fast,
        }
    }

    pub fn with_rounding(mut self, rounding: Rounding) -> Self {
        self.rounding = rounding;
        self
    }

    pub fn csp(&self) -> &'a QuadraticCsp {
        self.csp
    }

    pub fn t_choice(&self) -> TChoice {
        self.t
    }

    pub fn rounding(&self) -> Rounding {
        self.rounding
    }

    fn check_point(&self, p: &CertPoint) -> Result<(), CertError> {
        check_dims(self.csp, &p.y, &p.z)?;
        let n = self.csp.n();
        for (what, len) in [("u", p.u.len()), ("v", p.v.len())] {
            if len != n {
                return Err(CertError::Dimension {
                    what,
                    expected: n,
                    got: len,
                });
            }
        }
        Ok(())
    }

    /// `f` at `p` over the box `[p.u, p.v]`.
    pub fn value(&self, p: &CertPoint) -> Result<CertValue, CertError> {
        self.check_point(p)?;
        let t = self.t.value(&p.y)?;
        let bx = p.box_vec()?;
        let y = y_value(self.csp, &p.y, &p.z, self.rounding)?;
        let z = z_value(self.csp, &p.y, &p.z, &p.r, &p.s, &bx, self.rounding)?;
        if y == f64::NEG_INFINITY {
            return Ok(CertValue {
                f: f64::INFINITY,
                z,
                y,
                t,
            });
        }
        let num = match self.rounding {
            Rounding::Fast => z - y.max(0.0),
            Rounding::Outward => Interval::point(z)
                .try_sub(Interval::point(y.max(0.0)), Rounding::Outward)?
                .sup(),
        };
        Ok(CertValue { f: num / t, z, y, t })
    }

    /// Value and a subgradient at `p`. Branches of every min/max are fixed as
    /// selected by the (fast) evaluation, which gives the classical gradient
    /// wherever `f` is differentiable. The returned value always uses fast
    /// rounding.
    pub fn subgradient(&self, p: &CertPoint) -> Result<(CertValue, CertGradient), CertError> {
        self.check_point(p)?;
        let csp = self.csp;
        let n = csp.n();
        let m = csp.m();
        let t = self.t.value(&p.y)?;
        let bx = p.box_vec()?;

        // Z with endpoint selections.
        let cvec = c_vector(csp, &p.y, &p.z);
        let amat = a_matrix(csp, &p.y, &p.r, &p.s);
        let d_lo: Vec<f64> = (0..n).map(|j| bx[j].lo() - p.z[j]).collect();
        let d_hi: Vec<f64> = (0..n).map(|j| bx[j].hi() - p.z[j]).collect();
        let mut g_c = vec![0.0; n];
        let mut g_a = DMatrix::zeros(n, n);
        let mut g_dlo = vec![0.0; n];
        let mut g_dhi = vec![0.0; n];
        let mut z_val = 0.0;
        for i in 0..n {
            // pick[j]: (index of d endpoint in row.lo, in row.hi); 0 = lo, 1 = hi
            let mut row_lo = cvec[i];
            let mut row_hi = cvec[i];
            let mut pick = Vec::with_capacity(n);
            for j in 0..n {
                let a = amat[(j, i)];
                let pl = mul0(d_lo[j], a);
                let ph = mul0(d_hi[j], a);
                let lo_sel = if pl <= ph { 0 } else { 1 };
                let hi_sel = if pl >= ph { 0 } else { 1 };
                row_lo += pl.min(ph);
                row_hi += pl.max(ph);
                pick.push((lo_sel, hi_sel));
            }
            let rows = [row_lo, row_hi];
            let ds = [d_lo[i], d_hi[i]];
            let mut best = (0usize, 0usize);
            let mut best_val = f64::NEG_INFINITY;
            for (pr, &rv) in rows.iter().enumerate() {
                for (qd, &dv) in ds.iter().enumerate() {
                    let prod = mul0(rv, dv);
                    if prod > best_val {
                        best_val = prod;
                        best = (pr, qd);
                    }
                }
            }
            z_val += best_val;
            let (pr, qd) = best;
            let weight = ds[qd];
            if qd == 0 {
                g_dlo[i] += rows[pr];
            } else {
                g_dhi[i] += rows[pr];
            }
            g_c[i] += weight;
            for (j, &(lo_sel, hi_sel)) in pick.iter().enumerate() {
                let sel = if pr == 0 { lo_sel } else { hi_sel };
                let dj = if sel == 0 { d_lo[j] } else { d_hi[j] };
                g_a[(j, i)] += weight * dj;
                if sel == 0 {
                    g_dlo[j] += weight * amat[(j, i)];
                } else {
                    g_dhi[j] += weight * amat[(j, i)];
                }
            }
        }

        // Chain rule through c(y, z) and A(y, R, S).
        let cy = c_matrix(csp, &p.y);
        let mut gz_y = vec![0.0; m];
        for (k, g) in gz_y.iter_mut().enumerate() {
            let q = csp.quad(k);
            let ck = csp.linear(k);
            let mut acc = g_a.component_mul(q).sum();
            for i in 0..n {
                let mut sym = ck[i];
                for l in 0..n {
                    sym += (q[(i, l)] + q[(l, i)]) * p.z[l];
                }
                acc += g_c[i] * sym;
            }
            *g = acc;
        }
        let mut gz_z = vec![0.0; n];
        for (l, g) in gz_z.iter_mut().enumerate() {
            let mut acc = -(g_dlo[l] + g_dhi[l]);
            for i in 0..n {
                acc += g_c[i] * (cy[(i, l)] + cy[(l, i)]);
            }
            *g = acc;
        }
        let mut gz_r = DMatrix::zeros(n, n);
        let mut gz_s = DMatrix::zeros(n, n);
        for pp in 0..n {
            for q in pp..n {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += p.r[(pp, i)] * (g_a[(q, i)] + g_a[(i, q)]);
                }
                gz_r[(pp, q)] = acc;
                if q > pp {
                    gz_s[(pp, q)] = g_a[(q, pp)] - g_a[(pp, q)];
                }
            }
        }

        // Y and its branch.
        let y_val = y_value(csp, &p.y, &p.z, Rounding::Fast)?;
        if y_val == f64::NEG_INFINITY {
            let zeros = CertGradient {
                y: vec![0.0; m],
                z: vec![0.0; n],
                r: DMatrix::zeros(n, n),
                s: DMatrix::zeros(n, n),
                u: vec![0.0; n],
                v: vec![0.0; n],
            };
            return Ok((
                CertValue {
                    f: f64::INFINITY,
                    z: z_val,
                    y: y_val,
                    t,
                },
                zeros,
            ));
        }
        let mut gn_y = gz_y;
        let mut gn_z = gz_z;
        if y_val > 0.0 {
            for k in 0..m {
                let yk = p.y[k];
                let range = csp.range(k);
                let bound = if yk > 0.0 {
                    range.lo()
                } else if yk < 0.0 {
                    range.hi()
                } else if range.lo().is_finite() {
                    range.lo()
                } else {
                    range.hi()
                };
                let fz = csp.eval_k(k, &p.z);
                if bound.is_finite() {
                    gn_y[k] -= bound - fz;
                }
                if yk != 0.0 {
                    let grad = csp.gradient_k(k, &p.z);
                    for l in 0..n {
                        // dY/dz = -y_k grad F_k(z)
                        gn_z[l] += yk * grad[l];
                    }
                }
            }
        }
        let num = z_val - y_val.max(0.0);
        let f = num / t;

        // Quotient rule; only T = |y| depends on the variables.
        let mut gy: Vec<f64> = gn_y.iter().map(|g| g / t).collect();
        if self.t.variant == TVariant::NormY {
            for k in 0..m {
                gy[k] -= f * p.y[k] / (t * t);
            }
        }
        let scale = |v: Vec<f64>| -> Vec<f64> { v.into_iter().map(|g| g / t).collect() };
        let grad = CertGradient {
            y: gy,
            z: scale(gn_z),
            r: gz_r / t,
            s: gz_s / t,
            u: scale(g_dlo),
            v: scale(g_dhi),
        };
        Ok((
            CertValue {
                f,
                z: z_val,
                y: y_val,
                t,
            },
            grad,
        ))
    }
}

#[inline]
fn mul0(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{line_instance, plane_instance};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn line_point(y: f64, z: f64) -> CertPoint {
        CertPoint::new(vec![y], vec![z], vec![-1.0], vec![2.0])
    }

    /// Dense-grid supremum of the scalar expression behind `Z` on the line
    /// instance: `(c + (x - z) a)(x - z)` with `c = y(1+z)`, `a = y/2 + R^2`.
    fn grid_sup_line(y: f64, z: f64, r: f64, lo: f64, hi: f64) -> f64 {
        let c = y * (1.0 + z);
        let a = y / 2.0 + r * r;
        (0..=30000)
            .map(|i| {
                let x = lo + (hi - lo) * i as f64 / 30000.0;
                (c + (x - z) * a) * (x - z)
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn coefficient_examples() {
        let csp = plane_instance();
        let cy = c_matrix(&csp, &[1.0, 1.0]);
        assert_eq!(cy, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 11.0]));
        assert_eq!(c_vector(&csp, &[1.0, 1.0], &[0.0, 0.0]), vec![5.0, -1.0]);
        let zero = DMatrix::zeros(2, 2);
        assert_eq!(a_matrix(&csp, &[0.0, 0.0], &zero, &zero), zero);
    }

    #[test]
    fn z_on_line_example() {
        let csp = line_instance(-2.0, -1.0);
        let bx = BoxVec::from_bounds(&[-1.0], &[2.0]).unwrap();
        let zero = DMatrix::zeros(1, 1);
        let z = z_value(&csp, &[-1.0], &[-1.0], &zero, &zero, &bx, Rounding::Fast).unwrap();
        assert_eq!(z, 0.0);
        // the interval value here is exact: matches the grid supremum
        assert_eq!(grid_sup_line(-1.0, -1.0, 0.0, -1.0, 2.0), 0.0);
        let z0 = z_value(&csp, &[0.0], &[0.5], &zero, &zero, &bx, Rounding::Fast).unwrap();
        assert_eq!(z0, 0.0);
    }

    #[test]
    fn z_bounds_grid_sup_on_line() {
        let csp = line_instance(-2.0, -1.0);
        let bx = BoxVec::from_bounds(&[-1.0], &[2.0]).unwrap();
        for &(y, z, r) in &[(-1.0, 0.5, 0.0), (2.0, -0.3, 0.7), (-0.4, 1.9, 1.2)] {
            let rm = DMatrix::from_element(1, 1, r);
            let s = DMatrix::zeros(1, 1);
            let zv = z_value(&csp, &[y], &[z], &rm, &s, &bx, Rounding::Fast).unwrap();
            assert!(zv >= grid_sup_line(y, z, r, -1.0, 2.0) - 1e-12);
        }
    }

    #[test]
    fn y_examples() {
        let plane = plane_instance();
        assert_eq!(
            y_value(&plane, &[1.0, -1.0], &[0.0, 0.0], Rounding::Fast).unwrap(),
            -1.0
        );
        let line = line_instance(-2.0, -1.0);
        assert_eq!(y_value(&line, &[-1.0], &[-1.0], Rounding::Fast).unwrap(), 0.5);
        let half_open = plane.with_range(0, Interval::new(f64::NEG_INFINITY, 7.0).unwrap());
        assert_eq!(
            y_value(&half_open, &[1.0, 0.0], &[0.0, 0.0], Rounding::Fast).unwrap(),
            f64::NEG_INFINITY
        );
        // zero multiplier ignores an infinite bound
        assert_eq!(
            y_value(&half_open, &[0.0, -1.0], &[0.0, 0.0], Rounding::Fast).unwrap(),
            0.0
        );
    }

    #[test]
    fn f_examples_on_line() {
        let csp = line_instance(-2.0, -1.0);
        let p = line_point(-1.0, -1.0);
        let one = Certificate::new(&csp, TChoice::one()).value(&p).unwrap();
        assert_eq!(one.f, -0.5);
        let norm = Certificate::new(&csp, TChoice::norm_y()).value(&p).unwrap();
        assert_eq!(norm.f, -0.5);
        let rig = Certificate::new(&csp, TChoice::norm_y())
            .with_rounding(Rounding::Outward)
            .value(&p)
            .unwrap();
        assert!(rig.f < 0.0 && rig.f > -0.5 - 1e-12);

        let zero_y = line_point(0.0, 0.5);
        assert_eq!(Certificate::new(&csp, TChoice::one()).value(&zero_y).unwrap().f, 0.0);
        assert!(matches!(
            Certificate::new(&csp, TChoice::norm_y()).value(&zero_y),
            Err(CertError::ZeroDenominator { .. })
        ));
    }

    #[test]
    fn minus_infinity_maps_to_plus_infinity() {
        let csp = line_instance(f64::NEG_INFINITY, -1.0);
        let v = Certificate::new(&csp, TChoice::one())
            .value(&line_point(1.0, 0.0))
            .unwrap();
        assert_eq!(v.f, f64::INFINITY);
    }

    #[test]
    fn fast_value_matches_subgradient_value() {
        let csp = plane_instance();
        let mut p = CertPoint::new(vec![0.7, -1.3], vec![0.2, -0.5], vec![-1.0, -2.0], vec![2.0, 1.5]);
        p.r = DMatrix::from_row_slice(2, 2, &[0.3, -0.2, 0.0, 0.8]);
        p.s = DMatrix::from_row_slice(2, 2, &[0.0, 0.4, 0.0, 0.0]);
        for t in [TChoice::one(), TChoice::norm_y()] {
            let cert = Certificate::new(&csp, t);
            let a = cert.value(&p).unwrap();
            let (b, _) = cert.subgradient(&p).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn inactive_y_branch() {
        // y > 0 on the infeasible line instance: Y < 0, so Y contributes nothing
        let csp = line_instance(-2.0, -1.0);
        let p = line_point(1.0, 0.5);
        let (v, g) = Certificate::new(&csp, TChoice::one()).subgradient(&p).unwrap();
        assert!(v.y < 0.0);
        // f = Z, and Z is linear in y here (A = y/2, R = S = 0)
        assert!((g.y[0] - v.z / 1.0).abs() < 1e-12);
    }

    #[test]
    fn pack_round_trip() {
        let mut p = CertPoint::new(vec![1.0, 2.0], vec![3.0, 4.0], vec![0.0, 0.0], vec![5.0, 6.0]);
        p.r = DMatrix::from_row_slice(2, 2, &[7.0, 8.0, 0.0, 9.0]);
        p.s = DMatrix::from_row_slice(2, 2, &[0.0, 10.0, 0.0, 0.0]);
        let flat = p.pack(BlockMask::ALL);
        assert_eq!(flat, vec![1., 2., 3., 4., 7., 8., 9., 10., 0., 0., 5., 6.]);
        let mut q = CertPoint::new(vec![0.0; 2], vec![0.0; 2], vec![0.0; 2], vec![0.0; 2]);
        q.unpack(BlockMask::ALL, &flat);
        assert_eq!(p, q);
        assert_eq!(p.pack(BlockMask::fixed_box()), vec![1., 2., 3., 4.]);
    }

    fn random_point(rng: &mut ChaCha8Rng, csp: &QuadraticCsp) -> CertPoint {
        let n = csp.n();
        let m = csp.m();
        let mut p = CertPoint::new(
            (0..m).map(|_| rng.random_range(-2.0..2.0)).collect(),
            (0..n).map(|_| rng.random_range(-0.5..0.5)).collect(),
            (0..n).map(|_| rng.random_range(-2.0..-1.0)).collect(),
            (0..n).map(|_| rng.random_range(1.0..2.0)).collect(),
        );
        for i in 0..n {
            for j in i..n {
                p.r[(i, j)] = rng.random_range(-1.0..1.0);
                if j > i {
                    p.s[(i, j)] = rng.random_range(-1.0..1.0);
                }
            }
        }
        p
    }

    fn random_csp(rng: &mut ChaCha8Rng, n: usize, m: usize) -> QuadraticCsp {
        QuadraticCsp::new(
            (0..m)
                .map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect(),
            (0..m)
                .map(|_| DMatrix::from_fn(n, n, |i, j| if j <= i { rng.random_range(-2.0..2.0) } else { 0.0 }))
                .collect(),
            (0..m)
                .map(|_| {
                    let a: f64 = rng.random_range(-3.0..3.0);
                    Interval::new(a, a + rng.random_range(0.1..2.0)).unwrap()
                })
                .collect(),
            BoxVec::from_bounds(&vec![-2.0; n], &vec![2.0; n]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn subgradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 1e-6;
        for trial in 0..60 {
            let n = 1 + trial % 3;
            let csp = random_csp(&mut rng, n, 2);
            let p = random_point(&mut rng, &csp);
            let t = if trial % 2 == 0 {
                TChoice::one()
            } else {
                TChoice::norm_y()
            };
            let cert = Certificate::new(&csp, t);
            let (_, g) = cert.subgradient(&p).unwrap();
            let x = p.pack(BlockMask::ALL);
            let gx = g.pack(BlockMask::ALL);
            for i in 0..x.len() {
                let eval = |delta: f64| {
                    let mut q = p.clone();
                    let mut xs = x.clone();
                    xs[i] += delta;
                    q.unpack(BlockMask::ALL, &xs);
                    cert.value(&q).unwrap().f
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h);
                assert!(
                    (fd - gx[i]).abs() <= 1e-5 * gx[i].abs().max(1.0),
                    "trial {trial} coord {i}: fd {fd} vs {}",
                    gx[i]
                );
            }
        }
    }

    #[test]
    fn norm_y_certificate_is_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let csp = random_csp(&mut rng, 2, 2);
            let p = random_point(&mut rng, &csp);
            let cert = Certificate::new(&csp, TChoice::norm_y());
            let base = cert.value(&p).unwrap().f;
            for kappa in [1e-3, 1e-1, 10.0, 1e3] {
                let mut q = p.clone();
                q.y.iter_mut().for_each(|v| *v *= kappa);
                q.r *= kappa.sqrt();
                q.s *= kappa;
                let f = cert.value(&q).unwrap().f;
                assert!((f - base).abs() <= 1e-9 * base.abs().max(1.0));
            }
        }
    }
}
