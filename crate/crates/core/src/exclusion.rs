//! Finding and enlarging exclusion boxes, splitting what is left and pruning
//! a domain with a worklist.

use std::collections::VecDeque;
use std::time::Instant;

use thiserror::Error;

use crate::certificate::{BlockMask, CertError, CertPoint, Certificate, TChoice};
use crate::interval::{BoxVec, Interval, IntervalError, Rounding};
use crate::model::{ModelError, QuadraticCsp};
use crate::report::{BoxStatus, ReportRow};
use crate::solver::{
    minimize, minimize_constrained, Eval, LinearConstraints, PenaltyOptions, SolveError, SolveOptions, SolveReport,
    SolveStatus,
};
use crate::startpoint::{starting_point_on, StartError, StartOptions, StartOutcome};

#[derive(Debug, Error)]
pub enum ExclusionError {
    #[error(transparent)]
    Start(#[from] StartError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Cert(#[from] CertError),
    #[error(transparent)]
    Interval(#[from] IntervalError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0} needs a bounded domain")]
    UnboundedMeasure(&'static str),
    #[error("inner box is not contained in the outer box")]
    NotNested,
    #[error("region is not contained in the domain")]
    RegionOutsideDomain,
    #[error("enlargement target {delta} must lie in [{f_value}, 0)")]
    BadDelta { delta: f64, f_value: f64 },
    #[error("r must satisfy 0 <= r <= width componentwise")]
    BadR,
}

/// How the augmentation matrices `R` and `S` are treated during a search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightMode {
    /// Keep the values from the starting point.
    #[default]
    Start,
    /// Fix `R = S = 0`.
    Zero,
    /// Optimize them along with `y` and `z`.
    Optimize,
}

/// A box `[u, v]` and the argument at which the certificate is negative.
#[derive(Debug, Clone, PartialEq)]
pub struct ExclusionCertificate {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub witness: CertPoint,
    pub f_value: f64,
    pub t: TChoice,
}

impl ExclusionCertificate {
    pub fn box_vec(&self) -> BoxVec {
        BoxVec::from_bounds(&self.u, &self.v).expect("certificate box is valid")
    }

    /// Re-evaluates the certificate at its witness; negative means the box
    /// holds no feasible point. `+inf` when the witness center lies outside
    /// the box.
    pub fn verify(&self, csp: &QuadraticCsp, rounding: Rounding) -> Result<f64, CertError> {
        let w = &self.witness;
        if w.u != self.u || w.v != self.v || !in_box(&w.z, &w.u, &w.v) {
            return Ok(f64::INFINITY);
        }
        guarded_value(csp, self.t, rounding, w)
    }
}

fn in_box(z: &[f64], u: &[f64], v: &[f64]) -> bool {
    z.iter().zip(u.iter().zip(v)).all(|(z, (u, v))| u <= z && z <= v)
}

/// Certificate value with `Z` replaced by `max(Z, 0)`, which stays an upper
/// bound since `z` lies in the box. Rounding noise in `Z` then cannot make
/// `f` negative when `Y <= 0`.
fn guarded_value(csp: &QuadraticCsp, t: TChoice, rounding: Rounding, p: &CertPoint) -> Result<f64, CertError> {
    let v = Certificate::new(csp, t).with_rounding(rounding).value(p)?;
    if !v.y.is_finite() {
        return Ok(v.f);
    }
    Ok((v.z.max(0.0) - v.y.max(0.0)) / v.t)
}

/// Moves the center of `p` into its box and accepts the result when the
/// guarded value is negative.
fn accept(
    csp: &QuadraticCsp,
    t: TChoice,
    rounding: Rounding,
    mut p: CertPoint,
) -> Result<Option<ExclusionCertificate>, CertError> {
    for j in 0..p.n() {
        p.z[j] = p.z[j].clamp(p.u[j], p.v[j]);
    }
    let f = guarded_value(csp, t, rounding, &p)?;
    if !(f < 0.0) {
        return Ok(None);
    }
    Ok(Some(ExclusionCertificate {
        u: p.u.clone(),
        v: p.v.clone(),
        witness: p,
        f_value: f,
        t,
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub enum FindOutcome {
    Excluded(ExclusionCertificate),
    FeasibleFound(Vec<f64>),
    Unknown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FindResult {
    pub outcome: FindOutcome,
    /// `None` when the starting point was already feasible.
    pub report: Option<SolveReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FindOptions {
    pub t: TChoice,
    /// Keep `[u, v]` equal to the starting box.
    pub fixed_box: bool,
    /// Start from a box strictly inside the region.
    pub strict_interior: bool,
    pub weights: WeightMode,
    /// Minimum box size; defaults to `r_fraction` times the region width.
    pub r: Option<Vec<f64>>,
    pub r_fraction: f64,
    /// Stop at the first negative value instead of minimizing fully.
    pub early_exit: bool,
    /// Rounding used to verify a negative value.
    pub rounding: Rounding,
    pub solve: SolveOptions,
}

impl Default for FindOptions {
    fn default() -> Self {
        Self {
            t: TChoice::norm_y(),
            fixed_box: true,
            strict_interior: false,
            weights: WeightMode::Start,
            r: None,
            r_fraction: 0.25,
            early_exit: false,
            rounding: Rounding::Fast,
            solve: SolveOptions::default(),
        }
    }
}

impl FindOptions {
    /// Optimizes `u` and `v` too, starting strictly inside the region, and
    /// stops at the first negative value.
    pub fn variable_box() -> Self {
        Self {
            fixed_box: false,
            strict_interior: true,
            early_exit: true,
            ..Self::default()
        }
    }
}

fn mask_for(weights: WeightMode, fixed_box: bool) -> BlockMask {
    let mut mask = if fixed_box {
        BlockMask::fixed_box()
    } else {
        BlockMask::variable_box()
    };
    mask.w = weights == WeightMode::Optimize;
    mask
}

/// Bounds and rows for the packed variables of `p` under `mask`: `z` in the
/// region (and in `[u, v]` when the box moves), `u, v` in the given ranges,
/// everything else free.
fn layout_constraints(
    p: &CertPoint,
    mask: BlockMask,
    region: &BoxVec,
    u_range: &[Interval],
    v_range: &[Interval],
    r: Option<&[f64]>,
) -> LinearConstraints {
    let n = p.n();
    let mut bounds = Vec::new();
    if mask.y {
        bounds.extend(std::iter::repeat_n(Interval::entire(), p.y.len()));
    }
    let z_off = bounds.len();
    if mask.z {
        bounds.extend(region.iter().copied());
    }
    if mask.w {
        bounds.extend(std::iter::repeat_n(Interval::entire(), n * n));
    }
    let u_off = bounds.len();
    if mask.u {
        bounds.extend(u_range.iter().copied());
    }
    let v_off = bounds.len();
    if mask.v {
        bounds.extend(v_range.iter().copied());
    }
    let dim = bounds.len();
    let mut cons = LinearConstraints::with_bounds(bounds);
    if mask.u && mask.v {
        for j in 0..n {
            if let Some(r) = r {
                let mut a = vec![0.0; dim];
                a[u_off + j] = 1.0;
                a[v_off + j] = -1.0;
                cons.push_row(a, -r[j]);
            }
            if mask.z {
                let mut a = vec![0.0; dim];
                a[u_off + j] = 1.0;
                a[z_off + j] = -1.0;
                cons.push_row(a, 0.0);
                let mut a = vec![0.0; dim];
                a[z_off + j] = 1.0;
                a[v_off + j] = -1.0;
                cons.push_row(a, 0.0);
            }
        }
    }
    cons
}

/// Certificate oracle over the packed variables. Stops the run when it meets a
/// feasible `z`.
struct CertOracle<'a> {
    cert: Certificate<'a>,
    base: CertPoint,
    mask: BlockMask,
    feasible: Option<Vec<f64>>,
}

impl CertOracle<'_> {
    fn point(&self, x: &[f64]) -> CertPoint {
        let mut p = self.base.clone();
        p.unpack(self.mask, x);
        p
    }

    fn eval(&mut self, x: &[f64]) -> Eval {
        let p = self.point(x);
        if self.cert.csp().is_feasible(&p.z) {
            self.feasible = Some(p.z);
            return Eval::Halt;
        }
        match self.cert.subgradient(&p) {
            Ok((v, g)) if v.f.is_finite() => Eval::Point {
                value: v.f,
                subgradient: g.pack(self.mask),
            },
            _ => Eval::Undefined,
        }
    }
}

fn check_region(csp: &QuadraticCsp, region: &BoxVec) -> Result<(), ExclusionError> {
    if region.dim() != csp.n() || !region.is_subset(csp.domain()) {
        return Err(ExclusionError::RegionOutsideDomain);
    }
    Ok(())
}

/// Searches for a negative certificate value on (a box inside) `region`.
pub fn find_exclusion_box(
    csp: &QuadraticCsp,
    region: &BoxVec,
    opts: &FindOptions,
) -> Result<FindResult, ExclusionError> {
    check_region(csp, region)?;
    let n = csp.n();
    let widths = region.widths();
    let r: Vec<f64> = match &opts.r {
        Some(r) => r.clone(),
        None if opts.fixed_box => vec![0.0; n],
        None => widths.iter().map(|w| opts.r_fraction * w).collect(),
    };
    if r.len() != n || r.iter().zip(&widths).any(|(r, w)| !(*r >= 0.0 && r <= w)) {
        return Err(ExclusionError::BadR);
    }
    let start_opts = StartOptions {
        strict_interior: opts.strict_interior,
        r: r.clone(),
        ..StartOptions::default()
    };
    let mut p = match starting_point_on(csp, region, &start_opts)? {
        StartOutcome::Feasible(z) => {
            return Ok(FindResult {
                outcome: FindOutcome::FeasibleFound(z),
                report: None,
            })
        }
        StartOutcome::Start(p) => p,
    };
    if opts.weights == WeightMode::Zero {
        p.r.fill(0.0);
        p.s.fill(0.0);
    }
    let mask = mask_for(opts.weights, opts.fixed_box);
    let cons = layout_constraints(&p, mask, region, region.as_slice(), region.as_slice(), Some(&r));
    let x0 = p.pack(mask);
    let mut oracle = CertOracle {
        cert: Certificate::new(csp, opts.t),
        base: p,
        mask,
        feasible: None,
    };
    let solve = SolveOptions {
        early_exit: if opts.early_exit { Some(0.0) } else { None },
        ..opts.solve.clone()
    };
    let report = minimize(&mut |x: &[f64]| oracle.eval(x), &cons, &x0, &solve)?;
    if let Some(z) = oracle.feasible.take() {
        return Ok(FindResult {
            outcome: FindOutcome::FeasibleFound(z),
            report: Some(report),
        });
    }
    let mut outcome = FindOutcome::Unknown;
    if report.best_value < 0.0 {
        if let Some(cert) = accept(csp, opts.t, opts.rounding, oracle.point(&report.best))? {
            outcome = FindOutcome::Excluded(cert);
        }
    }
    Ok(FindResult {
        outcome,
        report: Some(report),
    })
}

/// Scalar size of a box; smaller is better for the enlargement objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoxMeasure {
    NegL1,
    NegHalfL2Sq,
    NegLinf,
    PosL1,
    PosHalfL2Sq,
    PosLinf,
}

impl BoxMeasure {
    pub fn name(&self) -> &'static str {
        match self {
            BoxMeasure::NegL1 => "neg-l1",
            BoxMeasure::NegHalfL2Sq => "neg-half-l2sq",
            BoxMeasure::NegLinf => "neg-linf",
            BoxMeasure::PosL1 => "pos-l1",
            BoxMeasure::PosHalfL2Sq => "pos-half-l2sq",
            BoxMeasure::PosLinf => "pos-linf",
        }
    }

    fn is_pos(&self) -> bool {
        matches!(self, BoxMeasure::PosL1 | BoxMeasure::PosHalfL2Sq | BoxMeasure::PosLinf)
    }
}

impl std::str::FromStr for BoxMeasure {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        [
            BoxMeasure::NegL1,
            BoxMeasure::NegHalfL2Sq,
            BoxMeasure::NegLinf,
            BoxMeasure::PosL1,
            BoxMeasure::PosHalfL2Sq,
            BoxMeasure::PosLinf,
        ]
        .into_iter()
        .find(|m| m.name() == s)
        .ok_or_else(|| format!("unknown box measure '{s}'"))
    }
}

/// Value and gradient with respect to `(u, v)`.
fn measure_with_gradient(
    kind: BoxMeasure,
    u: &[f64],
    v: &[f64],
    domain: &BoxVec,
) -> Result<(f64, Vec<f64>, Vec<f64>), ExclusionError> {
    let n = u.len();
    if kind.is_pos() && !domain.is_finite() {
        return Err(ExclusionError::UnboundedMeasure(kind.name()));
    }
    // Neg kinds act on the widths, Pos kinds on the gaps to the domain.
    let (terms, du, dv): (Vec<f64>, Vec<f64>, Vec<f64>) = if kind.is_pos() {
        let mut t: Vec<f64> = (0..n).map(|i| u[i] - domain[i].lo()).collect();
        t.extend((0..n).map(|i| v[i] - domain[i].hi()));
        (t, vec![1.0; n], vec![1.0; n])
    } else {
        ((0..n).map(|i| v[i] - u[i]).collect(), vec![-1.0; n], vec![1.0; n])
    };
    let sign = if kind.is_pos() { 1.0 } else { -1.0 };
    // derivative of the norm-like quantity with respect to each term
    let (value, dterm): (f64, Vec<f64>) = match kind {
        BoxMeasure::NegL1 | BoxMeasure::PosL1 => (
            terms.iter().map(|t| t.abs()).sum(),
            terms.iter().map(|t| if *t >= 0.0 { 1.0 } else { -1.0 }).collect(),
        ),
        BoxMeasure::NegHalfL2Sq | BoxMeasure::PosHalfL2Sq => {
            (0.5 * terms.iter().map(|t| t * t).sum::<f64>(), terms.clone())
        }
        BoxMeasure::NegLinf | BoxMeasure::PosLinf => {
            let (k, m) =
                terms.iter().enumerate().fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (i, t)| if t.abs() > acc.1 { (i, t.abs()) } else { acc },
                );
            let mut d = vec![0.0; terms.len()];
            if !terms.is_empty() {
                d[k] = if terms[k] >= 0.0 { 1.0 } else { -1.0 };
            }
            (m.max(0.0), d)
        }
    };
    let (gu, gv) = if kind.is_pos() {
        (
            (0..n).map(|i| sign * dterm[i] * du[i]).collect(),
            (0..n).map(|i| sign * dterm[n + i] * dv[i]).collect(),
        )
    } else {
        (
            (0..n).map(|i| sign * dterm[i] * du[i]).collect(),
            (0..n).map(|i| sign * dterm[i] * dv[i]).collect(),
        )
    };
    Ok((sign * value, gu, gv))
}

pub fn box_measure(kind: BoxMeasure, u: &[f64], v: &[f64], domain: &BoxVec) -> Result<f64, ExclusionError> {
    Ok(measure_with_gradient(kind, u, v, domain)?.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnlargeOptions {
    /// Target value; defaults to half the certificate value.
    pub delta: Option<f64>,
    pub measure: BoxMeasure,
    pub weights: WeightMode,
    pub rounding: Rounding,
    pub solve: SolveOptions,
    pub penalty: PenaltyOptions,
}

impl Default for EnlargeOptions {
    fn default() -> Self {
        Self {
            delta: None,
            measure: BoxMeasure::NegL1,
            weights: WeightMode::Start,
            rounding: Rounding::Fast,
            solve: SolveOptions::default(),
            penalty: PenaltyOptions::default(),
        }
    }
}

/// Grows `cert`'s box inside `region` while keeping the certificate at most
/// `delta`. The result always contains the input box.
pub fn enlarge_exclusion_box(
    csp: &QuadraticCsp,
    cert: &ExclusionCertificate,
    region: &BoxVec,
    opts: &EnlargeOptions,
) -> Result<(ExclusionCertificate, SolveReport), ExclusionError> {
    check_region(csp, region)?;
    let delta = opts.delta.unwrap_or(0.5 * cert.f_value);
    if !(delta >= cert.f_value && delta < 0.0) {
        return Err(ExclusionError::BadDelta {
            delta,
            f_value: cert.f_value,
        });
    }
    measure_with_gradient(opts.measure, &cert.u, &cert.v, region)?;
    let n = csp.n();
    let mask = mask_for(opts.weights, false);
    let base = cert.witness.clone();
    let u_range: Vec<Interval> = (0..n)
        .map(|i| Interval::new(region[i].lo(), cert.u[i]))
        .collect::<Result<_, _>>()?;
    let v_range: Vec<Interval> = (0..n)
        .map(|i| Interval::new(cert.v[i], region[i].hi()))
        .collect::<Result<_, _>>()?;
    let cons = layout_constraints(&base, mask, region, &u_range, &v_range, None);
    let x0 = base.pack(mask);
    let dim = x0.len();
    let u_off = dim - 2 * n;

    let unpack = |x: &[f64]| {
        let mut p = base.clone();
        p.unpack(mask, x);
        p
    };
    let mut obj = |x: &[f64]| {
        let p = unpack(x);
        match measure_with_gradient(opts.measure, &p.u, &p.v, region) {
            Ok((value, gu, gv)) => {
                let mut g = vec![0.0; dim];
                g[u_off..u_off + n].copy_from_slice(&gu);
                g[u_off + n..].copy_from_slice(&gv);
                Eval::Point { value, subgradient: g }
            }
            Err(_) => Eval::Undefined,
        }
    };
    let certificate = Certificate::new(csp, cert.t);
    let mut con = |x: &[f64]| match certificate.subgradient(&unpack(x)) {
        Ok((v, g)) if v.f.is_finite() => Eval::Point {
            value: v.f - delta,
            subgradient: g.pack(mask),
        },
        _ => Eval::Undefined,
    };
    let report = minimize_constrained(&mut obj, &mut con, &cons, &x0, &opts.solve, &opts.penalty)?;
    let fallback = |report| Ok((cert.clone(), report));
    if report.status == SolveStatus::Infeasible || !report.best_value.is_finite() {
        return fallback(report);
    }
    match accept(csp, cert.t, opts.rounding, unpack(&report.best))? {
        Some(bigger) if bigger.f_value <= delta => Ok((bigger, report)),
        _ => fallback(report),
    }
}

/// Boxes covering `outer` minus the interior of `inner`: for each dimension,
/// from the last to the first, the slabs below and above `inner`, each
/// restricted to `inner` in the dimensions already handled. Zero-width slabs
/// are left out.
pub fn split_complement(outer: &BoxVec, inner: &BoxVec) -> Result<Vec<BoxVec>, ExclusionError> {
    if outer.dim() != inner.dim() || !inner.is_subset(outer) {
        return Err(ExclusionError::NotNested);
    }
    let mut pieces = Vec::new();
    let mut current = outer.clone();
    for k in (0..outer.dim()).rev() {
        let (o, i) = (outer[k], inner[k]);
        if i.lo() > o.lo() {
            pieces.push(current.with_component(k, Interval::new(o.lo(), i.lo())?));
        }
        if i.hi() < o.hi() {
            pieces.push(current.with_component(k, Interval::new(i.hi(), o.hi())?));
        }
        current = current.with_component(k, i);
    }
    Ok(pieces)
}

/// Where the objective of an optimization problem comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveSource {
    /// Constraint `k` holds the objective; it is moved to the front.
    Constraint(usize),
    New {
        c: Vec<f64>,
        big_c: nalgebra::DMatrix<f64>,
    },
}

/// The CSP whose first constraint is `objective <= f_cur`. Its exclusion boxes
/// hold no feasible point better than the incumbent. With `f_cur = inf` the
/// first constraint is vacuous.
pub fn objective_cut(csp: &QuadraticCsp, source: &ObjectiveSource, f_cur: f64) -> Result<QuadraticCsp, ExclusionError> {
    let range = Interval::new(f64::NEG_INFINITY, f_cur)?;
    let mut linear = Vec::with_capacity(csp.m() + 1);
    let mut quad = Vec::with_capacity(csp.m() + 1);
    let mut ranges = Vec::with_capacity(csp.m() + 1);
    let skip = match source {
        ObjectiveSource::Constraint(k) => {
            if *k >= csp.m() {
                return Err(ModelError::Dimension {
                    what: "objective index".into(),
                    expected: csp.m(),
                    got: *k,
                }
                .into());
            }
            linear.push(csp.linear(*k).to_vec());
            quad.push(csp.quad(*k).clone());
            Some(*k)
        }
        ObjectiveSource::New { c, big_c } => {
            linear.push(c.clone());
            quad.push(big_c.clone());
            None
        }
    };
    ranges.push(range);
    for k in (0..csp.m()).filter(|&k| Some(k) != skip) {
        linear.push(csp.linear(k).to_vec());
        quad.push(csp.quad(k).clone());
        ranges.push(csp.range(k));
    }
    Ok(QuadraticCsp::new(linear, quad, ranges, csp.domain().clone())?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneBudget {
    pub max_boxes: usize,
    pub max_iter_per_box: usize,
    /// Boxes whose widest side is at most this are not bisected.
    pub min_width: f64,
    pub enlarge: bool,
}

impl Default for PruneBudget {
    fn default() -> Self {
        Self {
            max_boxes: 200,
            max_iter_per_box: 50,
            min_width: 1e-6,
            enlarge: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneOptions {
    pub budget: PruneBudget,
    pub t: TChoice,
    pub r_fraction: f64,
    pub weights: WeightMode,
    pub rounding: Rounding,
    pub tol: f64,
    pub enlarge: EnlargeOptions,
    /// Record wall-clock times in the report rows (otherwise 0).
    pub timing: bool,
    /// Try to certify each popped box as a whole before searching for a
    /// sub-box.
    pub whole_box_first: bool,
}

impl Default for PruneOptions {
    fn default() -> Self {
        Self {
            budget: PruneBudget::default(),
            t: TChoice::norm_y(),
            r_fraction: 0.25,
            weights: WeightMode::Start,
            rounding: Rounding::Fast,
            tol: 1e-5,
            enlarge: EnlargeOptions::default(),
            timing: false,
            whole_box_first: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PruneResult {
    pub excluded: Vec<ExclusionCertificate>,
    pub remaining: Vec<BoxVec>,
    pub feasible_points: Vec<Vec<f64>>,
    pub rows: Vec<ReportRow>,
}

/// Worklist pruning of the whole domain.
pub fn prune(csp: &QuadraticCsp, opts: &PruneOptions) -> Result<PruneResult, ExclusionError> {
    let mut work: VecDeque<(BoxVec, Option<usize>)> = VecDeque::new();
    work.push_back((csp.domain().clone(), None));
    let mut out = PruneResult {
        excluded: Vec::new(),
        remaining: Vec::new(),
        feasible_points: Vec::new(),
        rows: Vec::new(),
    };
    let find_opts = FindOptions {
        t: opts.t,
        weights: opts.weights,
        r_fraction: opts.r_fraction,
        rounding: opts.rounding,
        solve: SolveOptions {
            max_iter: opts.budget.max_iter_per_box,
            tol: opts.tol,
            ..SolveOptions::default()
        },
        ..FindOptions::variable_box()
    };
    let whole_opts = FindOptions {
        fixed_box: true,
        strict_interior: false,
        ..find_opts.clone()
    };
    let mut processed = 0;
    while let Some((bx, parent)) = work.pop_front() {
        if processed >= opts.budget.max_boxes {
            out.remaining.push(bx);
            continue;
        }
        let id = processed;
        processed += 1;
        let clock = Instant::now();
        let mut calls = 0;
        let mut iterations = 0;
        let mut cost = 0.0;
        let mut tally = |found: &FindResult| {
            if let Some(rep) = &found.report {
                calls += rep.counters.n_calls;
                iterations += rep.iterations;
                cost += rep.cost();
            }
        };
        let mut found = None;
        if opts.whole_box_first {
            let whole = find_exclusion_box(csp, &bx, &whole_opts)?;
            tally(&whole);
            if !matches!(whole.outcome, FindOutcome::Unknown) {
                found = Some(whole);
            }
        }
        let found = match found {
            Some(f) => f,
            None => {
                let f = find_exclusion_box(csp, &bx, &find_opts)?;
                tally(&f);
                f
            }
        };
        let splittable = bx.widths().iter().copied().fold(0.0, f64::max) > opts.budget.min_width;
        let (status, f_value) = match found.outcome {
            FindOutcome::Excluded(cert) => {
                let mut cert = cert;
                if opts.budget.enlarge {
                    let (bigger, rep) = enlarge_exclusion_box(csp, &cert, &bx, &opts.enlarge)?;
                    calls += rep.counters.n_calls;
                    iterations += rep.iterations;
                    cost += rep.cost();
                    cert = bigger;
                }
                let f = cert.f_value;
                for piece in split_complement(&bx, &cert.box_vec())? {
                    work.push_back((piece, Some(id)));
                }
                out.excluded.push(cert);
                (BoxStatus::Excluded, f)
            }
            FindOutcome::FeasibleFound(z) => {
                out.feasible_points.push(z);
                bisect_or_keep(&bx, id, splittable, &mut work, &mut out.remaining)?;
                (BoxStatus::Feasible, f64::NAN)
            }
            FindOutcome::Unknown => {
                bisect_or_keep(&bx, id, splittable, &mut work, &mut out.remaining)?;
                let f = found.report.as_ref().map_or(f64::NAN, |r| r.best_value);
                (BoxStatus::Unknown, f)
            }
        };
        out.rows.push(ReportRow {
            box_id: id,
            parent_id: parent,
            lo: bx.lo(),
            hi: bx.hi(),
            status,
            f_value,
            iterations,
            n_calls: calls,
            cost,
            wall_millis: if opts.timing {
                clock.elapsed().as_millis() as u64
            } else {
                0
            },
        });
    }
    Ok(out)
}

fn bisect_or_keep(
    bx: &BoxVec,
    id: usize,
    splittable: bool,
    work: &mut VecDeque<(BoxVec, Option<usize>)>,
    remaining: &mut Vec<BoxVec>,
) -> Result<(), ExclusionError> {
    if splittable {
        let (a, b) = bx.bisect(bx.widest())?;
        work.push_back((a, Some(id)));
        work.push_back((b, Some(id)));
    } else {
        remaining.push(bx.clone());
    }
    Ok(())
}
