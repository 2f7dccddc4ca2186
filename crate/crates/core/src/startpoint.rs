//! Starting point for the certificate search: a box inside the domain, its
//! midpoint, sign-driven multipliers and augmentation matrices that make
//! `A(y, R, S)` positive semidefinite.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::certificate::{c_matrix, CertPoint};
use crate::interval::{BoxVec, Interval};
use crate::model::QuadraticCsp;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StartError {
    #[error("invalid start options: {0}")]
    Options(String),
    #[error("component {i}: minimum size r = {r} leaves no room in [{lo}, {hi}]")]
    BoxTooSmall { i: usize, r: f64, lo: f64, hi: f64 },
    #[error("component {i} of the domain is unbounded")]
    Unbounded { i: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StartOptions {
    pub strict_interior: bool,
    pub t0: f64,
    pub t1: f64,
    /// Minimum box size per component; empty means zero.
    pub r: Vec<f64>,
}

impl Default for StartOptions {
    fn default() -> Self {
        Self {
            strict_interior: false,
            t0: 0.1,
            t1: 0.9,
            r: Vec::new(),
        }
    }
}

impl StartOptions {
    pub fn strict() -> Self {
        Self {
            strict_interior: true,
            ..Self::default()
        }
    }

    fn r_at(&self, i: usize) -> f64 {
        self.r.get(i).copied().unwrap_or(0.0)
    }

    fn validate(&self, n: usize) -> Result<(), StartError> {
        if !(0.0 < self.t0 && self.t0 < self.t1 && self.t1 < 1.0) {
            return Err(StartError::Options(format!(
                "need 0 < t0 < t1 < 1, got t0 = {}, t1 = {}",
                self.t0, self.t1
            )));
        }
        if !self.r.is_empty() && self.r.len() != n {
            return Err(StartError::Options(format!(
                "r has length {}, expected {n}",
                self.r.len()
            )));
        }
        if self.r.iter().any(|&r| !(r >= 0.0)) {
            return Err(StartError::Options("r must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StartOutcome {
    /// The box midpoint already satisfies every constraint.
    Feasible(Vec<f64>),
    Start(CertPoint),
}

pub fn initial_box(domain: &BoxVec, opts: &StartOptions) -> Result<(Vec<f64>, Vec<f64>), StartError> {
    let n = domain.dim();
    opts.validate(n)?;
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for (i, x) in domain.iter().enumerate() {
        let (lo, hi) = (x.lo(), x.hi());
        if !x.is_finite() {
            return Err(StartError::Unbounded { i });
        }
        let r = opts.r_at(i);
        if r > hi - lo {
            return Err(StartError::BoxTooSmall { i, r, lo, hi });
        }
        if opts.strict_interior {
            let ui = (1.0 - opts.t0) * lo + opts.t0 * (hi - r);
            let vi = (1.0 - opts.t1) * (lo + r) + opts.t1 * hi;
            if ui + r >= vi {
                return Err(StartError::BoxTooSmall { i, r, lo, hi });
            }
            u.push(ui);
            v.push(vi);
        } else {
            u.push(lo);
            v.push(hi);
        }
    }
    Ok((u, v))
}

pub fn initial_z(u: &[f64], v: &[f64]) -> Vec<f64> {
    u.iter().zip(v).map(|(a, b)| 0.5 * (a + b)).collect()
}

pub fn initial_y(fz: &[f64], ranges: &[Interval]) -> Vec<f64> {
    fz.iter()
        .zip(ranges)
        .map(|(&f, range)| {
            if f < range.lo() {
                1.0
            } else if range.hi() < f {
                -1.0
            } else {
                0.0
            }
        })
        .collect()
}

/// `S = -1/2 * strict_upper(C(y)^T)`.
pub fn build_s(cy: &DMatrix<f64>) -> DMatrix<f64> {
    let n = cy.nrows();
    DMatrix::from_fn(n, n, |i, j| if j > i { -0.5 * cy[(j, i)] } else { 0.0 })
}

pub fn default_delta(a: &DMatrix<f64>) -> f64 {
    1e-8 * inf_norm(a).max(1.0)
}

pub(crate) fn inf_norm(a: &DMatrix<f64>) -> f64 {
    a.row_iter()
        .map(|row| row.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Factorizes `a = R^T R - D` with `R` upper triangular and `D` a
/// nonnegative diagonal. A pivot is raised when it falls below `delta` or when
/// keeping it would let the column of `R` grow past the bound
/// `beta^2 = max(max |a_ii|, max |a_ij| / sqrt(n^2 - 1), eps)`, so `R` stays
/// bounded on indefinite input and `D = 0` on positive definite input with
/// pivots at least `delta`.
pub fn modified_cholesky(a: &DMatrix<f64>, delta: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let gamma = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
    let xi = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| a[(i, j)].abs())
        .fold(0.0, f64::max);
    let mut beta2 = gamma.max(f64::EPSILON);
    if n > 1 {
        beta2 = beta2.max(xi / ((n * n - 1) as f64).sqrt());
    }
    let mut r = DMatrix::zeros(n, n);
    let mut d = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut p = a[(j, j)];
        for k in 0..j {
            p -= r[(k, j)] * r[(k, j)];
        }
        let mut col = vec![0.0; n];
        let mut theta: f64 = 0.0;
        for i in j + 1..n {
            let mut c = a[(j, i)];
            for k in 0..j {
                c -= r[(k, j)] * r[(k, i)];
            }
            col[i] = c;
            theta = theta.max(c.abs());
        }
        let growth = theta * theta / beta2;
        let mut pivot = p;
        if p < delta {
            pivot = delta;
        }
        if growth > pivot * (1.0 + 1e-10) {
            pivot = growth;
        }
        if pivot != p {
            d[(j, j)] = pivot - p;
        }
        let rjj = pivot.sqrt();
        r[(j, j)] = rjj;
        for i in j + 1..n {
            r[(j, i)] = col[i] / rjj;
        }
    }
    (r, d)
}

/// Builds the start point of the certificate search on the domain of `csp`.
pub fn starting_point(csp: &QuadraticCsp, opts: &StartOptions) -> Result<StartOutcome, StartError> {
    starting_point_on(csp, csp.domain(), opts)
}

/// As [`starting_point`], on a sub-box of the domain.
pub fn starting_point_on(csp: &QuadraticCsp, region: &BoxVec, opts: &StartOptions) -> Result<StartOutcome, StartError> {
    let (u, v) = initial_box(region, opts)?;
    let z = initial_z(&u, &v);
    if csp.is_feasible(&z) {
        return Ok(StartOutcome::Feasible(z));
    }
    let fz: Vec<f64> = (0..csp.m()).map(|k| csp.eval_k(k, &z)).collect();
    let y = initial_y(&fz, csp.ranges());
    let cy = c_matrix(csp, &y);
    let s = build_s(&cy);
    let ahat = &cy + s.transpose() - &s;
    let (_, d) = modified_cholesky(&ahat, default_delta(&ahat));
    let r = d.map(f64::sqrt);
    Ok(StartOutcome::Start(CertPoint { y, z, r, s, u, v }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificate::a_matrix;
    use crate::model::fixtures::{line_instance, plane_instance};
    use nalgebra::SymmetricEigen;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn max_abs(m: &DMatrix<f64>) -> f64 {
        m.iter().fold(0.0, |a, x| a.max(x.abs()))
    }

    fn reconstruction_error(a: &DMatrix<f64>) -> (f64, DMatrix<f64>, DMatrix<f64>) {
        let (r, d) = modified_cholesky(a, default_delta(a));
        let err = max_abs(&(r.transpose() * &r - &d - a));
        (err, r, d)
    }

    #[test]
    fn box_examples() {
        let line = BoxVec::from_bounds(&[-1.0], &[2.0]).unwrap();
        let (u, v) = initial_box(&line, &StartOptions::strict()).unwrap();
        assert!((u[0] + 0.7).abs() < 1e-15 && (v[0] - 1.7).abs() < 1e-15);
        assert_eq!(
            initial_box(&line, &StartOptions::default()).unwrap(),
            (vec![-1.0], vec![2.0])
        );
        let plane = BoxVec::from_bounds(&[-3.0, -4.0], &[3.0, 4.0]).unwrap();
        assert_eq!(
            initial_box(&plane, &StartOptions::default()).unwrap(),
            (vec![-3.0, -4.0], vec![3.0, 4.0])
        );
        let too_big = StartOptions {
            r: vec![3.5],
            ..StartOptions::strict()
        };
        assert!(matches!(
            initial_box(&line, &too_big),
            Err(StartError::BoxTooSmall { .. })
        ));
        let bad = StartOptions {
            t0: 0.9,
            t1: 0.1,
            ..StartOptions::default()
        };
        assert!(initial_box(&line, &bad).is_err());
    }

    #[test]
    fn z_examples() {
        assert_eq!(initial_z(&[-1.0], &[2.0]), vec![0.5]);
        assert_eq!(initial_z(&[-3.0, -4.0], &[3.0, 4.0]), vec![0.0, 0.0]);
        assert_eq!(initial_z(&[1.0, 1.0], &[1.0, 3.0]), vec![1.0, 2.0]);
    }

    #[test]
    fn y_examples() {
        let r = |lo, hi| Interval::new(lo, hi).unwrap();
        assert_eq!(initial_y(&[0.625], &[r(-2.0, -1.0)]), vec![-1.0]);
        assert_eq!(initial_y(&[0.0, 0.0], &[r(-1.0, 7.0), r(-2.0, 0.0)]), vec![0.0, 0.0]);
        assert_eq!(initial_y(&[5.0], &[Interval::entire()]), vec![0.0]);
        assert_eq!(initial_y(&[-5.0], &[r(f64::NEG_INFINITY, -6.0)]), vec![-1.0]);
        assert_eq!(initial_y(&[-5.0], &[r(-4.0, f64::INFINITY)]), vec![1.0]);
    }

    #[test]
    fn s_examples() {
        let cy = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 11.0]);
        let s = build_s(&cy);
        assert_eq!(s, DMatrix::from_row_slice(2, 2, &[0.0, -0.5, 0.0, 0.0]));
        let ahat = &cy + s.transpose() - &s;
        assert_eq!(ahat, DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 11.0]));
        let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, -1.0]));
        assert_eq!(build_s(&diag), DMatrix::zeros(2, 2));
        assert_eq!(build_s(&DMatrix::zeros(3, 3)), DMatrix::zeros(3, 3));
    }

    #[test]
    fn cholesky_examples() {
        let eye = DMatrix::identity(3, 3);
        let (r, d) = modified_cholesky(&eye, 1e-8);
        assert_eq!(r, eye);
        assert_eq!(d, DMatrix::zeros(3, 3));

        let pd = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 11.0]);
        let (err, _, d) = reconstruction_error(&pd);
        assert!(err <= 1e-12);
        assert_eq!(d, DMatrix::zeros(2, 2));

        let neg = DMatrix::from_row_slice(2, 2, &[-2.0, -1.5, -1.5, -4.0]);
        let delta = default_delta(&neg);
        let (err, r, d) = reconstruction_error(&neg);
        assert!(err <= 1e-10 * inf_norm(&neg).max(1.0));
        for j in 0..2 {
            assert!(d[(j, j)] >= 0.0);
            assert!(r[(j, j)] * r[(j, j)] >= delta * (1.0 - 1e-12));
        }
    }

    #[test]
    fn cholesky_random_mixed() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let n = rng.random_range(1..=6);
            let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-3.0..3.0));
            let a = (&b + b.transpose()) * 0.5;
            let (err, _, d) = reconstruction_error(&a);
            assert!(err <= 1e-10 * inf_norm(&a).max(1.0), "err {err}");
            assert!(d.diagonal().iter().all(|&x| x >= 0.0));
            let eig = SymmetricEigen::new(a.clone()).eigenvalues.min();
            if eig >= 1e-6 {
                assert_eq!(d, DMatrix::zeros(n, n));
            }
        }
    }

    #[test]
    fn start_on_infeasible_line() {
        let csp = line_instance(-2.0, -1.0);
        let StartOutcome::Start(p) = starting_point(&csp, &StartOptions::default()).unwrap() else {
            panic!("expected a start point");
        };
        assert_eq!(
            (p.y.clone(), p.z.clone(), p.u.clone(), p.v.clone()),
            (vec![-1.0], vec![0.5], vec![-1.0], vec![2.0])
        );
        assert_eq!(p.s[(0, 0)], 0.0);
        let delta: f64 = 1e-8;
        assert!((p.r[(0, 0)] - (0.5 + delta).sqrt()).abs() < 1e-15);
        let a = a_matrix(&csp, &p.y, &p.r, &p.s);
        assert!(a[(0, 0)] >= 0.0);
    }

    #[test]
    fn start_reports_feasible_midpoints() {
        assert_eq!(
            starting_point(&plane_instance(), &StartOptions::default()).unwrap(),
            StartOutcome::Feasible(vec![0.0, 0.0])
        );
        assert_eq!(
            starting_point(&line_instance(-2.0, 1.0), &StartOptions::default()).unwrap(),
            StartOutcome::Feasible(vec![0.5])
        );
    }

    #[test]
    fn start_matrix_is_psd() {
        let csp = plane_instance()
            .with_range(0, Interval::new(3.0, 7.0).unwrap())
            .with_range(1, Interval::new(-2.0, -1.0).unwrap());
        let StartOutcome::Start(p) = starting_point(&csp, &StartOptions::strict()).unwrap() else {
            panic!("expected a start point");
        };
        let a = a_matrix(&csp, &p.y, &p.r, &p.s);
        let sym = (&a + a.transpose()) * 0.5;
        assert!(SymmetricEigen::new(sym).eigenvalues.min() >= -1e-10);
    }
}
