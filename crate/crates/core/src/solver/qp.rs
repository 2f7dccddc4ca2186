//! Dense convex quadratic programs
//! `min 1/2 x^T H x + g^T x  s.t.  a_i . x <= b_i`
//! with `H` positive definite, solved by the Goldfarb-Idnani dual active set
//! method.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("constraints are infeasible")]
    Infeasible,
    #[error("Hessian is not positive definite")]
    NotPositiveDefinite,
    #[error("active set iteration did not converge")]
    NoConvergence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: Vec<f64>,
    /// One nonnegative multiplier per row.
    pub multipliers: Vec<f64>,
    pub value: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn givens(a: f64, b: f64) -> (f64, f64, f64) {
    let h = a.hypot(b);
    if h == 0.0 {
        (1.0, 0.0, 0.0)
    } else {
        (a / h, b / h, h)
    }
}

// Rotates columns k and k+1 of `j`.
fn rotate_cols(j: &mut DMatrix<f64>, k: usize, c: f64, s: f64) {
    for i in 0..j.nrows() {
        let x = j[(i, k)];
        let y = j[(i, k + 1)];
        j[(i, k)] = c * x + s * y;
        j[(i, k + 1)] = -s * x + c * y;
    }
}

pub fn solve(h: &DMatrix<f64>, g: &[f64], rows: &[Vec<f64>], b: &[f64]) -> Result<QpSolution, QpError> {
    let n = g.len();
    assert_eq!(h.nrows(), n);
    assert_eq!(rows.len(), b.len());
    let chol = h.clone().cholesky().ok_or(QpError::NotPositiveDefinite)?;
    let l_inv = chol
        .l()
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or(QpError::NotPositiveDefinite)?;
    // J = L^{-T}; its first q columns span the active normals after rotation.
    let mut jm = l_inv.transpose();
    let mut x: Vec<f64> = (-chol.solve(&DVector::from_column_slice(g))).iter().copied().collect();

    // Internal form n_i . x >= c_i with n_i = -a_i, c_i = -b_i.
    let normals: Vec<Vec<f64>> = rows.iter().map(|a| a.iter().map(|v| -v).collect()).collect();
    let rhs: Vec<f64> = b.iter().map(|v| -v).collect();
    let norms: Vec<f64> = normals.iter().map(|a| dot(a, a).sqrt()).collect();

    let mut r = DMatrix::<f64>::zeros(n, n);
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let max_steps = 50 * (n + rows.len()) + 100;
    let mut steps = 0;

    loop {
        let xnorm = dot(&x, &x).sqrt();
        let mut pick: Option<(usize, f64)> = None;
        for i in 0..rows.len() {
            if active.contains(&i) || norms[i] == 0.0 {
                if norms[i] == 0.0 && rhs[i] > 1e-12 * (1.0 + rhs[i].abs()) {
                    return Err(QpError::Infeasible);
                }
                continue;
            }
            let s = dot(&normals[i], &x) - rhs[i];
            let tol = 1e-12 * (1.0 + rhs[i].abs() + norms[i] * xnorm);
            if s < -tol {
                let scaled = s / norms[i];
                if pick.is_none_or(|(_, best)| scaled < best) {
                    pick = Some((i, scaled));
                }
            }
        }
        let Some((p, _)) = pick else { break };
        let np = &normals[p];
        let mut u_plus = u.clone();
        u_plus.push(0.0);

        loop {
            steps += 1;
            if steps > max_steps {
                return Err(QpError::NoConvergence);
            }
            let q = active.len();
            let d: Vec<f64> = (0..n)
                .map(|k| jm.column(k).iter().zip(np).map(|(a, b)| a * b).sum())
                .collect();
            let mut z = vec![0.0; n];
            for k in q..n {
                for i in 0..n {
                    z[i] += jm[(i, k)] * d[k];
                }
            }
            let mut rv = vec![0.0; q];
            for i in (0..q).rev() {
                let mut s = d[i];
                for k in i + 1..q {
                    s -= r[(i, k)] * rv[k];
                }
                rv[i] = s / r[(i, i)];
            }
            let mut t1 = f64::INFINITY;
            let mut drop_at = None;
            for k in 0..q {
                if rv[k] > 0.0 {
                    let ratio = u_plus[k] / rv[k];
                    if ratio < t1 {
                        t1 = ratio;
                        drop_at = Some(k);
                    }
                }
            }
            let zn = dot(&z, np);
            let scale = norms[p] * (dot(&z, &z).sqrt());
            let t2 = if zn.abs() > 1e-14 * scale.max(f64::MIN_POSITIVE) && zn > 0.0 {
                -(dot(np, &x) - rhs[p]) / zn
            } else {
                f64::INFINITY
            };
            let t = t1.min(t2);
            if t == f64::INFINITY {
                return Err(QpError::Infeasible);
            }
            for k in 0..q {
                u_plus[k] -= t * rv[k];
            }
            u_plus[q] += t;
            if t2.is_finite() {
                for i in 0..n {
                    x[i] += t * z[i];
                }
            }
            if t2 <= t1 {
                // Add constraint p.
                let mut d = d;
                for k in (q + 1..n).rev() {
                    let (c, s, hh) = givens(d[k - 1], d[k]);
                    d[k - 1] = hh;
                    d[k] = 0.0;
                    rotate_cols(&mut jm, k - 1, c, s);
                }
                for i in 0..=q {
                    r[(i, q)] = d[i];
                }
                active.push(p);
                u = u_plus;
                break;
            }
            // Drop constraint `l` and retriangularize.
            let l = drop_at.expect("partial step without a blocking constraint");
            active.remove(l);
            u_plus.remove(l);
            for col in l..q - 1 {
                for i in 0..n {
                    r[(i, col)] = r[(i, col + 1)];
                }
            }
            for i in 0..n {
                r[(i, q - 1)] = 0.0;
            }
            for col in l..q - 1 {
                let (c, s, hh) = givens(r[(col, col)], r[(col + 1, col)]);
                r[(col, col)] = hh;
                r[(col + 1, col)] = 0.0;
                for k in col + 1..q - 1 {
                    let a = r[(col, k)];
                    let bb = r[(col + 1, k)];
                    r[(col, k)] = c * a + s * bb;
                    r[(col + 1, k)] = -s * a + c * bb;
                }
                rotate_cols(&mut jm, col, c, s);
            }
        }
    }

    let mut multipliers = vec![0.0; rows.len()];
    for (k, &i) in active.iter().enumerate() {
        multipliers[i] = u[k].max(0.0);
    }
    let hx = h * DVector::from_column_slice(&x);
    let value = 0.5 * dot(hx.as_slice(), &x) + dot(g, &x);
    Ok(QpSolution { x, multipliers, value })
}
