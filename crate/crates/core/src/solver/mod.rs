//! Local minimization of locally Lipschitz functions under linear constraints
//! by a proximal bundle method, plus an exact penalty wrapper for one extra
//! nonsmooth inequality.

pub mod qp;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::interval::Interval;

/// Result of one oracle call.
#[derive(Debug, Clone, PartialEq)]
pub enum Eval {
    Point {
        value: f64,
        subgradient: Vec<f64>,
    },
    /// The function is not defined at the point.
    Undefined,
    /// Stop the run immediately.
    Halt,
}

pub trait Oracle {
    fn eval(&mut self, x: &[f64]) -> Eval;
}

impl<F: FnMut(&[f64]) -> Eval> Oracle for F {
    fn eval(&mut self, x: &[f64]) -> Eval {
        self(x)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalCounters {
    /// Objective calls, each returning value and subgradient.
    pub n_calls: u64,
    pub n_constraint_calls: u64,
    /// Number of variables.
    pub dim: usize,
    /// Number of nonlinear constraints (0 or 1).
    pub nlc: u32,
}

impl EvalCounters {
    pub fn new(dim: usize, nlc: u32) -> Self {
        Self {
            dim,
            nlc,
            ..Self::default()
        }
    }

    /// Credit points: one for a value and three for a subgradient, per call.
    pub fn cost(&self) -> f64 {
        (1.0 + self.nlc as f64) * self.n_calls as f64 * 4.0
    }

    pub fn add(&mut self, other: &EvalCounters) {
        self.n_calls += other.n_calls;
        self.n_constraint_calls += other.n_constraint_calls;
    }
}

/// Credit points of a method that also charges `3N` per call for second order
/// information.
pub fn second_order_cost(calls: u64, dim: usize, nlc: u32) -> f64 {
    (1.0 + nlc as f64) * calls as f64 * (4.0 + 3.0 * dim as f64)
}

/// Cost of run `b` minus cost of run `a`.
pub fn rp_cost(a: &EvalCounters, b: &EvalCounters) -> f64 {
    b.cost() - a.cost()
}

/// Bounds per variable and rows `a . x <= b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraints {
    pub bounds: Vec<Interval>,
    pub rows: Vec<(Vec<f64>, f64)>,
}

impl LinearConstraints {
    pub fn unbounded(n: usize) -> Self {
        Self {
            bounds: vec![Interval::entire(); n],
            rows: Vec::new(),
        }
    }

    pub fn with_bounds(bounds: Vec<Interval>) -> Self {
        Self {
            bounds,
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, a: Vec<f64>, b: f64) {
        self.rows.push((a, b));
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        self.bounds
            .iter()
            .zip(x)
            .all(|(b, &v)| v >= b.lo() - tol && v <= b.hi() + tol)
            && self.rows.iter().all(|(a, b)| dot(a, x) <= b + tol)
    }

    /// Every bound and row as `a . x <= b`, skipping infinite bounds.
    fn all_rows(&self) -> Vec<(Vec<f64>, f64)> {
        let n = self.dim();
        let mut out = Vec::new();
        for (i, b) in self.bounds.iter().enumerate() {
            if b.hi().is_finite() {
                let mut a = vec![0.0; n];
                a[i] = 1.0;
                out.push((a, b.hi()));
            }
            if b.lo().is_finite() {
                let mut a = vec![0.0; n];
                a[i] = -1.0;
                out.push((a, -b.lo()));
            }
        }
        out.extend(self.rows.iter().cloned());
        out
    }

    /// Euclidean projection, or `None` when the set is empty.
    pub fn project(&self, x: &[f64]) -> Option<Vec<f64>> {
        if self.is_feasible(x, 0.0) {
            return Some(x.to_vec());
        }
        let n = self.dim();
        let rows = self.all_rows();
        let (a, b): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
        let g: Vec<f64> = x.iter().map(|v| -v).collect();
        let sol = qp::solve(&DMatrix::identity(n, n), &g, &a, &b).ok()?;
        Some(self.clamp(sol.x))
    }

    fn clamp(&self, mut x: Vec<f64>) -> Vec<f64> {
        for (v, b) in x.iter_mut().zip(&self.bounds) {
            *v = v.clamp(b.lo(), b.hi());
        }
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    EarlyExit,
    Stationary,
    IterLimit,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub max_iter: usize,
    pub tol: f64,
    /// Stop as soon as the best value drops below this.
    pub early_exit: Option<f64>,
    pub t_init: f64,
    pub bundle_cap: usize,
    /// Serious step test parameter.
    pub descent: f64,
    /// Weight of the distance term in the locality measure.
    pub locality: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: 1e-5,
            early_exit: None,
            t_init: 1.0,
            bundle_cap: 30,
            descent: 0.1,
            locality: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub best: Vec<f64>,
    pub best_value: f64,
    pub iterations: usize,
    pub counters: EvalCounters,
    /// Last stationarity measure computed (infinite if none).
    pub stationarity: f64,
    /// Best value after each oracle call that returned a point.
    pub history: Vec<f64>,
}

impl SolveReport {
    pub fn cost(&self) -> f64 {
        self.counters.cost()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("start point has length {got}, constraints have {expected} variables")]
    Dimension { expected: usize, got: usize },
    #[error("objective is undefined at the start point")]
    UndefinedStart,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone)]
struct Cut {
    g: Vec<f64>,
    /// Linearization evaluated at the current center.
    lin: f64,
    /// Distance bound from the center to the point the cut came from.
    dist: f64,
}

struct Tracker {
    best: Vec<f64>,
    best_value: f64,
    history: Vec<f64>,
    early_exit: Option<f64>,
}

impl Tracker {
    /// Records a point; returns true when the early exit threshold is met.
    fn record(&mut self, x: &[f64], value: f64) -> bool {
        if value < self.best_value {
            self.best_value = value;
            self.best = x.to_vec();
        }
        self.history.push(self.best_value);
        matches!(self.early_exit, Some(thr) if self.best_value < thr)
    }
}

/// Minimizes the oracle over `cons` starting from `x0` (projected onto `cons`
/// when infeasible).
pub fn minimize<O: Oracle>(
    oracle: &mut O,
    cons: &LinearConstraints,
    x0: &[f64],
    opts: &SolveOptions,
) -> Result<SolveReport, SolveError> {
    minimize_counted(oracle, cons, x0, opts, 0)
}

fn minimize_counted<O: Oracle>(
    oracle: &mut O,
    cons: &LinearConstraints,
    x0: &[f64],
    opts: &SolveOptions,
    nlc: u32,
) -> Result<SolveReport, SolveError> {
    let n = cons.dim();
    if x0.len() != n {
        return Err(SolveError::Dimension {
            expected: n,
            got: x0.len(),
        });
    }
    let mut counters = EvalCounters::new(n, nlc);
    let Some(x0) = cons.project(x0) else {
        return Ok(SolveReport {
            status: SolveStatus::Infeasible,
            best: x0.to_vec(),
            best_value: f64::INFINITY,
            iterations: 0,
            counters,
            stationarity: f64::INFINITY,
            history: Vec::new(),
        });
    };
    let mut tr = Tracker {
        best: x0.clone(),
        best_value: f64::INFINITY,
        history: Vec::new(),
        early_exit: opts.early_exit,
    };
    let finish = |status, tr: Tracker, iterations, counters, stationarity| SolveReport {
        status,
        best: tr.best,
        best_value: tr.best_value,
        iterations,
        counters,
        stationarity,
        history: tr.history,
    };

    counters.n_calls += 1;
    let (mut fc, gc) = match oracle.eval(&x0) {
        Eval::Point { value, subgradient } if value.is_finite() && subgradient.iter().all(|g| g.is_finite()) => {
            (value, subgradient)
        }
        Eval::Halt => return Ok(finish(SolveStatus::EarlyExit, tr, 0, counters, f64::INFINITY)),
        _ => return Err(SolveError::UndefinedStart),
    };
    let mut xc = x0;
    if tr.record(&xc, fc) {
        return Ok(finish(SolveStatus::EarlyExit, tr, 0, counters, f64::INFINITY));
    }

    let all_rows = cons.all_rows();
    let mut bundle = vec![Cut {
        g: gc,
        lin: fc,
        dist: 0.0,
    }];
    let mut t = opts.t_init;
    let t_min = 1e-12 * opts.t_init;
    let t_max = 1e6 * opts.t_init;
    let mut stationarity = f64::INFINITY;

    for iter in 1..=opts.max_iter {
        let alphas: Vec<f64> = bundle
            .iter()
            .map(|c| (fc - c.lin).abs().max(opts.locality * c.dist * c.dist))
            .collect();
        let Some(step) = proximal_step(&bundle, &alphas, &all_rows, &xc, t) else {
            return Ok(finish(SolveStatus::IterLimit, tr, iter - 1, counters, stationarity));
        };

        // Normalized aggregate: a convex combination of the cuts.
        let lam_sum: f64 = step.lambda.iter().sum();
        let mut g_agg = vec![0.0; n];
        let mut alpha_agg = 0.0;
        let mut lin_agg = 0.0;
        let mut dist_agg = 0.0;
        for (k, c) in bundle.iter().enumerate() {
            let w = step.lambda[k] / lam_sum;
            for i in 0..n {
                g_agg[i] += w * c.g[i];
            }
            alpha_agg += w * alphas[k];
            lin_agg += w * c.lin;
            dist_agg += w * c.dist;
        }
        let mut resid = g_agg.clone();
        let mut compl = 0.0;
        for (j, (a, b)) in all_rows.iter().enumerate() {
            let mu = step.mu[j] / lam_sum;
            if mu > 0.0 {
                for i in 0..n {
                    resid[i] += mu * a[i];
                }
                compl += mu * (b - dot(a, &xc)).max(0.0);
            }
        }
        stationarity = norm(&resid) + alpha_agg + compl;
        if stationarity <= opts.tol {
            return Ok(finish(SolveStatus::Stationary, tr, iter - 1, counters, stationarity));
        }

        let d = step.d;
        let v = bundle
            .iter()
            .zip(&alphas)
            .map(|(c, a)| dot(&c.g, &d) - a)
            .fold(f64::NEG_INFINITY, f64::max);
        let xt = cons.clamp(xc.iter().zip(&d).map(|(a, b)| a + b).collect());
        let dn = norm(&d);

        counters.n_calls += 1;
        let (ft, gt) = match oracle.eval(&xt) {
            Eval::Halt => return Ok(finish(SolveStatus::EarlyExit, tr, iter, counters, stationarity)),
            Eval::Point { value, subgradient } if value.is_finite() && subgradient.iter().all(|g| g.is_finite()) => {
                (value, subgradient)
            }
            _ => {
                t = (t / 10.0).max(t_min);
                continue;
            }
        };
        if tr.record(&xt, ft) {
            return Ok(finish(SolveStatus::EarlyExit, tr, iter, counters, stationarity));
        }

        let mut kept: Vec<Cut> = bundle
            .iter()
            .zip(&step.lambda)
            .filter(|(_, &l)| l > 0.0)
            .map(|(c, _)| c.clone())
            .collect();
        if kept.len() + 1 > opts.bundle_cap {
            kept = vec![Cut {
                g: g_agg,
                lin: lin_agg,
                dist: dist_agg,
            }];
        }

        if ft <= fc + opts.descent * v {
            // Serious step: move the center and shift the linearizations.
            for c in kept.iter_mut() {
                c.lin += dot(&c.g, &d);
                c.dist += dn;
            }
            kept.push(Cut {
                g: gt,
                lin: ft,
                dist: 0.0,
            });
            if ft <= fc + 0.5 * v {
                t = (2.0 * t).min(t_max);
            }
            xc = xt;
            fc = ft;
        } else {
            let lin = ft - dot(&gt, &d);
            let alpha_new = (fc - lin).abs().max(opts.locality * dn * dn);
            kept.push(Cut { g: gt, lin, dist: dn });
            if alpha_new > v.abs() {
                t = (t / 2.0).max(t_min);
            }
        }
        bundle = kept;
    }
    Ok(finish(
        SolveStatus::IterLimit,
        tr,
        opts.max_iter,
        counters,
        stationarity,
    ))
}

struct Step {
    d: Vec<f64>,
    lambda: Vec<f64>,
    mu: Vec<f64>,
}

/// Solves `min xi + |d|^2 / 2t  s.t.  g_k . d - alpha_k <= xi,  rows at xc + d`
/// with a small proximal term on `xi` that keeps the Hessian definite. The
/// perturbed solution solves the unperturbed problem for a rescaled `t`, so
/// only the multipliers need normalizing.
fn proximal_step(bundle: &[Cut], alphas: &[f64], rows: &[(Vec<f64>, f64)], xc: &[f64], t: f64) -> Option<Step> {
    let n = xc.len();
    let gmax = bundle.iter().map(|c| dot(&c.g, &c.g)).fold(0.0, f64::max);
    let amax = alphas.iter().copied().fold(0.0, f64::max);
    let rho = 0.25 / (1.0 + 3.0 * t * gmax + 2.0 * amax);
    let mut h = DMatrix::zeros(n + 1, n + 1);
    for i in 0..n {
        h[(i, i)] = 1.0 / t;
    }
    h[(n, n)] = rho;
    let mut g = vec![0.0; n + 1];
    g[n] = 1.0;
    let mut a = Vec::with_capacity(bundle.len() + rows.len());
    let mut b = Vec::with_capacity(bundle.len() + rows.len());
    for (c, &alpha) in bundle.iter().zip(alphas) {
        let mut row = c.g.clone();
        row.push(-1.0);
        a.push(row);
        b.push(alpha);
    }
    for (row, rhs) in rows {
        let mut r = row.clone();
        r.push(0.0);
        a.push(r);
        // rounding can leave the center a hair outside; keep d = 0 feasible
        b.push((rhs - dot(row, xc)).max(0.0));
    }
    let sol = qp::solve(&h, &g, &a, &b).ok()?;
    let lambda = sol.multipliers[..bundle.len()].to_vec();
    if lambda.iter().sum::<f64>() <= 0.0 {
        return None;
    }
    Some(Step {
        d: sol.x[..n].to_vec(),
        lambda,
        mu: sol.multipliers[bundle.len()..].to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyOptions {
    pub penalty0: f64,
    pub growth: f64,
    pub rounds: usize,
}

impl Default for PenaltyOptions {
    fn default() -> Self {
        Self {
            penalty0: 10.0,
            growth: 10.0,
            rounds: 3,
        }
    }
}

/// Minimizes `obj` subject to `con <= 0` and `cons` with an exact penalty.
/// Only points with `con <= 0` are ever reported as best.
pub fn minimize_constrained<O: Oracle, C: Oracle>(
    obj: &mut O,
    con: &mut C,
    cons: &LinearConstraints,
    x0: &[f64],
    opts: &SolveOptions,
    popts: &PenaltyOptions,
) -> Result<SolveReport, SolveError> {
    let n = cons.dim();
    let mut counters = EvalCounters::new(n, 1);
    let infeasible = |counters| SolveReport {
        status: SolveStatus::Infeasible,
        best: x0.to_vec(),
        best_value: f64::INFINITY,
        iterations: 0,
        counters,
        stationarity: f64::INFINITY,
        history: Vec::new(),
    };
    let Some(start) = cons.project(x0) else {
        return Ok(infeasible(counters));
    };
    counters.n_constraint_calls += 1;
    match con.eval(&start) {
        Eval::Point { value, .. } if value <= 0.0 => {}
        Eval::Halt => {
            return Ok(SolveReport {
                status: SolveStatus::EarlyExit,
                ..infeasible(counters)
            })
        }
        _ => return Ok(infeasible(counters)),
    }

    let mut best = start.clone();
    let mut best_value = f64::INFINITY;
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut status = SolveStatus::IterLimit;
    let mut stationarity = f64::INFINITY;
    let mut from = start;
    let mut penalty = popts.penalty0;

    for _ in 0..popts.rounds.max(1) {
        let mut calls = EvalCounters::default();
        let mut penalized = |x: &[f64]| -> Eval {
            calls.n_calls += 1;
            calls.n_constraint_calls += 1;
            let (fo, go) = match obj.eval(x) {
                Eval::Point { value, subgradient } => (value, subgradient),
                other => return other,
            };
            let (fc, gcon) = match con.eval(x) {
                Eval::Point { value, subgradient } => (value, subgradient),
                other => return other,
            };
            if fc <= 0.0 && fo < best_value {
                best_value = fo;
                best = x.to_vec();
            }
            history.push(best_value);
            if fc > 0.0 {
                Eval::Point {
                    value: fo + penalty * fc,
                    subgradient: go.iter().zip(&gcon).map(|(a, b)| a + penalty * b).collect(),
                }
            } else {
                Eval::Point {
                    value: fo,
                    subgradient: go,
                }
            }
        };
        let rep = minimize_counted(&mut penalized, cons, &from, opts, 1)?;
        counters.add(&calls);
        iterations += rep.iterations;
        stationarity = rep.stationarity;
        status = rep.status;
        if matches!(status, SolveStatus::EarlyExit) {
            break;
        }
        // Done once the penalized minimizer is feasible.
        let end_feasible = {
            counters.n_constraint_calls += 1;
            matches!(con.eval(&rep.best), Eval::Point { value, .. } if value <= 0.0)
        };
        if end_feasible {
            break;
        }
        penalty *= popts.growth;
        from = best.clone();
    }
    Ok(SolveReport {
        status,
        best,
        best_value,
        iterations,
        counters,
        stationarity,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn abs_oracle(x: &[f64]) -> Eval {
        Eval::Point {
            value: x[0].abs(),
            subgradient: vec![if x[0] >= 0.0 { 1.0 } else { -1.0 }],
        }
    }

    #[test]
    fn minimizes_abs() {
        let mut o = abs_oracle;
        let opts = SolveOptions {
            tol: 1e-6,
            ..SolveOptions::default()
        };
        let rep = minimize(&mut o, &LinearConstraints::unbounded(1), &[1.0], &opts).unwrap();
        assert!(rep.best_value <= 1e-6);
    }

    #[test]
    fn linear_with_active_bound() {
        let mut o2 = |x: &[f64]| Eval::Point {
            value: x[0],
            subgradient: vec![1.0],
        };
        let cons = LinearConstraints::with_bounds(vec![Interval::new(3.0, f64::INFINITY).unwrap()]);
        let rep = minimize(&mut o2, &cons, &[5.0], &SolveOptions::default()).unwrap();
        assert_eq!(rep.best, vec![3.0]);
        assert_eq!(rep.status, SolveStatus::Stationary);
    }

    #[test]
    fn early_exit_on_threshold() {
        let mut calls = 0;
        let mut o = |x: &[f64]| {
            calls += 1;
            abs_oracle(&[x[0] - 0.5])
        };
        let opts = SolveOptions {
            early_exit: Some(0.25),
            ..SolveOptions::default()
        };
        let rep = minimize(&mut o, &LinearConstraints::unbounded(1), &[2.0], &opts).unwrap();
        assert_eq!(rep.status, SolveStatus::EarlyExit);
        assert!(rep.best_value < 0.25);
        assert_eq!(rep.counters.n_calls, calls);
        // the triggering call is the last one
        assert_eq!(rep.history.last().copied(), Some(rep.best_value));
        assert!(rep.history[..rep.history.len() - 1].iter().all(|&v| v >= 0.25));
    }

    #[test]
    fn halt_maps_to_early_exit() {
        let mut n = 0;
        let mut o = |x: &[f64]| {
            n += 1;
            if n == 3 {
                Eval::Halt
            } else {
                abs_oracle(x)
            }
        };
        let opts = SolveOptions {
            t_init: 0.1,
            ..SolveOptions::default()
        };
        let rep = minimize(&mut o, &LinearConstraints::unbounded(1), &[5.0], &opts).unwrap();
        assert_eq!(rep.status, SolveStatus::EarlyExit);
        assert_eq!(rep.counters.n_calls, 3);
    }

    #[test]
    fn undefined_points_shrink_the_step() {
        let mut o = |x: &[f64]| {
            if x[0] < -0.5 {
                Eval::Undefined
            } else {
                Eval::Point {
                    value: (x[0] + 0.4).abs(),
                    subgradient: vec![if x[0] >= -0.4 { 1.0 } else { -1.0 }],
                }
            }
        };
        let opts = SolveOptions {
            t_init: 100.0,
            ..SolveOptions::default()
        };
        let rep = minimize(&mut o, &LinearConstraints::unbounded(1), &[3.0], &opts).unwrap();
        assert!(rep.best_value < 1e-4, "{}", rep.best_value);
    }

    #[test]
    fn infeasible_constraints() {
        let mut cons = LinearConstraints::with_bounds(vec![Interval::new(0.0, 1.0).unwrap()]);
        cons.push_row(vec![1.0], -1.0);
        let mut o = abs_oracle;
        let rep = minimize(&mut o, &cons, &[0.5], &SolveOptions::default()).unwrap();
        assert_eq!(rep.status, SolveStatus::Infeasible);
        assert_eq!(rep.counters.n_calls, 0);
    }

    #[test]
    fn start_is_projected() {
        let mut cons = LinearConstraints::unbounded(2);
        cons.push_row(vec![1.0, 1.0], -2.0);
        let mut o = |x: &[f64]| Eval::Point {
            value: x[0] * x[0] + x[1] * x[1],
            subgradient: vec![2.0 * x[0], 2.0 * x[1]],
        };
        let rep = minimize(&mut o, &cons, &[3.0, 3.0], &SolveOptions::default()).unwrap();
        assert!((rep.best[0] + 1.0).abs() < 1e-3 && (rep.best[1] + 1.0).abs() < 1e-3);
        assert!(rep.best[0] + rep.best[1] <= -2.0 + 1e-9);
    }

    /// `max_k (a_k . x + b_k) + 1/2 |x - c|^2` over a box.
    fn random_pl_quadratic(rng: &mut ChaCha8Rng, n: usize) -> impl FnMut(&[f64]) -> Eval {
        let k = rng.random_range(2..6);
        let a: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..n).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let b: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        move |x: &[f64]| {
            let (idx, val) = a.iter().zip(&b).map(|(ak, bk)| dot(ak, x) + bk).enumerate().fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
            );
            let quad: f64 = x.iter().zip(&c).map(|(xi, ci)| 0.5 * (xi - ci).powi(2)).sum();
            Eval::Point {
                value: val + quad,
                subgradient: (0..n).map(|i| a[idx][i] + x[i] - c[i]).collect(),
            }
        }
    }

    #[test]
    fn converges_on_random_convex_functions() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let n = rng.random_range(1..5);
            let mut o = random_pl_quadratic(&mut rng, n);
            let cons = LinearConstraints::with_bounds(vec![Interval::new(-1.0, 1.0).unwrap(); n]);
            let x0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let opts = SolveOptions {
                max_iter: 500,
                ..SolveOptions::default()
            };
            let rep = minimize(&mut o, &cons, &x0, &opts).unwrap();
            assert_eq!(rep.status, SolveStatus::Stationary, "stationarity {}", rep.stationarity);
            assert!(rep.stationarity <= opts.tol);
            assert!(rep.history.windows(2).all(|w| w[1] <= w[0]));
            assert!(cons.is_feasible(&rep.best, 1e-9));
        }
    }

    #[test]
    fn cost_model() {
        let c = EvalCounters {
            n_calls: 10,
            ..EvalCounters::default()
        };
        assert_eq!(c.cost(), 40.0);
        assert_eq!(second_order_cost(10, 5, 0), 190.0);
        assert_eq!(rp_cost(&c, &c), 0.0);
        let d = EvalCounters { nlc: 1, ..c };
        assert_eq!(d.cost(), 80.0);
    }

    #[test]
    fn inactive_nonlinear_constraint() {
        let mut obj = abs_oracle;
        let mut con = |_: &[f64]| Eval::Point {
            value: -1.0,
            subgradient: vec![0.0],
        };
        let opts = SolveOptions {
            tol: 1e-6,
            ..SolveOptions::default()
        };
        let rep = minimize_constrained(
            &mut obj,
            &mut con,
            &LinearConstraints::unbounded(1),
            &[1.0],
            &opts,
            &PenaltyOptions::default(),
        )
        .unwrap();
        assert!(rep.best_value <= 1e-6);
    }

    #[test]
    fn best_point_respects_nonlinear_constraint() {
        // minimize x subject to 1 - x^2 <= 0 near x = 2: optimum at x = 1
        let mut obj = |x: &[f64]| Eval::Point {
            value: x[0],
            subgradient: vec![1.0],
        };
        let mut con = |x: &[f64]| Eval::Point {
            value: 1.0 - x[0] * x[0],
            subgradient: vec![-2.0 * x[0]],
        };
        let cons = LinearConstraints::with_bounds(vec![Interval::new(0.0, 3.0).unwrap()]);
        for p0 in [10.0, 1e9] {
            let popts = PenaltyOptions {
                penalty0: p0,
                ..PenaltyOptions::default()
            };
            let rep =
                minimize_constrained(&mut obj, &mut con, &cons, &[2.0], &SolveOptions::default(), &popts).unwrap();
            assert!(1.0 - rep.best[0] * rep.best[0] <= 0.0);
            assert!(rep.best_value <= 1.0 + 1e-3, "{}", rep.best_value);
        }
        // starting on the boundary with a huge penalty stays feasible
        let popts = PenaltyOptions {
            penalty0: 1e12,
            ..PenaltyOptions::default()
        };
        let rep = minimize_constrained(&mut obj, &mut con, &cons, &[1.0], &SolveOptions::default(), &popts).unwrap();
        assert!(1.0 - rep.best[0] * rep.best[0] <= 0.0);
        // violated start
        let rep = minimize_constrained(&mut obj, &mut con, &cons, &[0.5], &SolveOptions::default(), &popts).unwrap();
        assert_eq!(rep.status, SolveStatus::Infeasible);
    }
}
