//! C interface to certbox.
//!
//! Problems and search results are opaque handles created by this library and
//! released with the matching `_free` function. Every fallible function returns
//! a [`CertboxStatus`]; on failure [`certbox_last_error`] describes the cause.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use certbox::certificate::TChoice;
use certbox::exclusion::{find_exclusion_box, split_complement, FindOptions, FindOutcome};
use certbox::interval::BoxVec;
use certbox::model::{parse_problem_with, ParseOptions, QuadraticCsp};
use certbox::solver::SolveOptions;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertboxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Dimension = 4,
    InvalidArgument = 5,
    Solver = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertboxOutcome {
    /// The box provably holds no feasible point.
    Excluded = 0,
    /// A feasible point was found.
    Feasible = 1,
    /// Neither within the iteration budget.
    Unknown = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertboxDenominator {
    One = 0,
    NormY = 1,
}

/// A parsed problem.
pub struct CertboxProblem {
    csp: QuadraticCsp,
}

/// The outcome of a certificate search.
pub struct CertboxFindResult {
    outcome: CertboxOutcome,
    lo: Vec<f64>,
    hi: Vec<f64>,
    f_value: f64,
    point: Vec<f64>,
    calls: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: CertboxStatus, msg: impl Into<String>) -> CertboxStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> CertboxStatus) -> CertboxStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(CertboxStatus::Panic, "internal panic"),
    }
}

/// Message for the last failed call on this thread, or NULL.
///
/// The pointer stays valid until the next call into this library on the same
/// thread.
#[no_mangle]
pub extern "C" fn certbox_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Parses a problem from NUL-terminated JSON text.
///
/// # Safety
///
/// `json` must be a valid NUL-terminated string and `out` a valid pointer.
/// The handle written to `out` must be released with `certbox_problem_free`.
#[no_mangle]
pub unsafe extern "C" fn certbox_problem_parse(
    json: *const c_char,
    fold_upper: bool,
    out: *mut *mut CertboxProblem,
) -> CertboxStatus {
    guard(|| {
        if json.is_null() || out.is_null() {
            return fail(CertboxStatus::NullPointer, "null argument");
        }
        let text = match CStr::from_ptr(json).to_str() {
            Ok(t) => t,
            Err(e) => return fail(CertboxStatus::InvalidUtf8, e.to_string()),
        };
        match parse_problem_with(text, ParseOptions { fold_upper }) {
            Ok(parsed) => {
                *out = Box::into_raw(Box::new(CertboxProblem { csp: parsed.csp }));
                CertboxStatus::Ok
            }
            Err(e) => fail(CertboxStatus::Parse, e.to_string()),
        }
    })
}

/// Releases a problem. Passing NULL is a no-op.
///
/// # Safety
///
/// `problem` must come from `certbox_problem_parse` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn certbox_problem_free(problem: *mut CertboxProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Writes the number of variables and of constraints.
///
/// # Safety
///
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn certbox_problem_dims(
    problem: *const CertboxProblem,
    n: *mut usize,
    m: *mut usize,
) -> CertboxStatus {
    guard(|| {
        if problem.is_null() || n.is_null() || m.is_null() {
            return fail(CertboxStatus::NullPointer, "null argument");
        }
        let p = &*problem;
        *n = p.csp.n();
        *m = p.csp.m();
        CertboxStatus::Ok
    })
}

/// Evaluates all constraint functions at `x` (length `n`) into `out`
/// (length `m`).
///
/// # Safety
///
/// `x` must point to `n` doubles and `out` to `m` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn certbox_problem_eval(
    problem: *const CertboxProblem,
    x: *const f64,
    n: usize,
    out: *mut f64,
    m: usize,
) -> CertboxStatus {
    guard(|| {
        if problem.is_null() || x.is_null() || out.is_null() {
            return fail(CertboxStatus::NullPointer, "null argument");
        }
        let csp = &(*problem).csp;
        if n != csp.n() || m != csp.m() {
            return fail(
                CertboxStatus::Dimension,
                format!("expected n = {}, m = {}", csp.n(), csp.m()),
            );
        }
        let values = match csp.eval(slice::from_raw_parts(x, n)) {
            Ok(v) => v,
            Err(e) => return fail(CertboxStatus::Dimension, e.to_string()),
        };
        slice::from_raw_parts_mut(out, m).copy_from_slice(&values);
        CertboxStatus::Ok
    })
}

/// Searches for a certificate on the whole domain. With `variable_box` the
/// box may shrink to a quarter of the domain width and the search stops at the
/// first negative value; otherwise the box is the domain and the certificate
/// is minimized for at most `max_iter` iterations.
///
/// # Safety
///
/// `problem` and `out` must be valid. The handle written to `out` must be
/// released with `certbox_find_result_free`.
#[no_mangle]
pub unsafe extern "C" fn certbox_find(
    problem: *const CertboxProblem,
    denominator: CertboxDenominator,
    variable_box: bool,
    max_iter: usize,
    out: *mut *mut CertboxFindResult,
) -> CertboxStatus {
    guard(|| {
        if problem.is_null() || out.is_null() {
            return fail(CertboxStatus::NullPointer, "null argument");
        }
        let csp = &(*problem).csp;
        let base = if variable_box {
            FindOptions::variable_box()
        } else {
            FindOptions::default()
        };
        let opts = FindOptions {
            t: match denominator {
                CertboxDenominator::One => TChoice::one(),
                CertboxDenominator::NormY => TChoice::norm_y(),
            },
            solve: SolveOptions {
                max_iter,
                ..SolveOptions::default()
            },
            ..base
        };
        let res = match find_exclusion_box(csp, csp.domain(), &opts) {
            Ok(r) => r,
            Err(e) => return fail(CertboxStatus::Solver, e.to_string()),
        };
        let calls = res.report.as_ref().map_or(0, |r| r.counters.n_calls);
        let best = res.report.as_ref().map_or(f64::NAN, |r| r.best_value);
        let result = match res.outcome {
            FindOutcome::Excluded(cert) => CertboxFindResult {
                outcome: CertboxOutcome::Excluded,
                lo: cert.u,
                hi: cert.v,
                f_value: cert.f_value,
                point: cert.witness.z,
                calls,
            },
            FindOutcome::FeasibleFound(z) => CertboxFindResult {
                outcome: CertboxOutcome::Feasible,
                lo: csp.domain().lo(),
                hi: csp.domain().hi(),
                f_value: f64::NAN,
                point: z,
                calls,
            },
            FindOutcome::Unknown => CertboxFindResult {
                outcome: CertboxOutcome::Unknown,
                lo: csp.domain().lo(),
                hi: csp.domain().hi(),
                f_value: best,
                point: Vec::new(),
                calls,
            },
        };
        *out = Box::into_raw(Box::new(result));
        CertboxStatus::Ok
    })
}

/// Releases a search result. Passing NULL is a no-op.
///
/// # Safety
///
/// `result` must come from `certbox_find` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn certbox_find_result_free(result: *mut CertboxFindResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// # Safety
///
/// `result` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn certbox_find_result_outcome(
    result: *const CertboxFindResult,
    out: *mut CertboxOutcome,
) -> CertboxStatus {
    guard(|| {
        if result.is_null() || out.is_null() {
            return fail(CertboxStatus::NullPointer, "null argument");
        }
        *out = (*result).outcome;
        CertboxStatus::Ok
    })
}

/// Certificate value for `Excluded`, best value reached for `Unknown`, NaN
/// for `Feasible`.
///
/// # Safety
///
/// `result` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn certbox_find_result_f_value(result: *const CertboxFindResult, out: *mut f64) -> CertboxStatus {
    guard(|| {
        if result.is_null() || out.is_null() {
            return fail(CertboxStatus::NullPointer, "null argument");
        }
        *out = (*result).f_value;
        CertboxStatus::Ok
    })
}

/// Number of certificate evaluations spent.
///
/// # Safety
///
/// `result` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn certbox_find_result_calls(result: *const CertboxFindResult, out: *mut u64) -> CertboxStatus {
    guard(|| {
        if result.is_null() || out.is_null() {
            return fail(CertboxStatus::NullPointer, "null argument");
        }
        *out = (*result).calls;
        CertboxStatus::Ok
    })
}

/// Copies the box (the excluded box, or the domain otherwise) into `lo` and
/// `hi`, each of length `n`.
///
/// # Safety
///
/// `lo` and `hi` must point to `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn certbox_find_result_box(
    result: *const CertboxFindResult,
    lo: *mut f64,
    hi: *mut f64,
    n: usize,
) -> CertboxStatus {
    guard(|| {
        if result.is_null() || lo.is_null() || hi.is_null() {
            return fail(CertboxStatus::NullPointer, "null argument");
        }
        let r = &*result;
        if n != r.lo.len() {
            return fail(CertboxStatus::Dimension, format!("expected n = {}", r.lo.len()));
        }
        slice::from_raw_parts_mut(lo, n).copy_from_slice(&r.lo);
        slice::from_raw_parts_mut(hi, n).copy_from_slice(&r.hi);
        CertboxStatus::Ok
    })
}

/// Copies the feasible point, or the witness center of a certificate, into
/// `out` (length `n`). Fails for `Unknown`.
///
/// # Safety
///
/// `out` must point to `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn certbox_find_result_point(
    result: *const CertboxFindResult,
    out: *mut f64,
    n: usize,
) -> CertboxStatus {
    guard(|| {
        if result.is_null() || out.is_null() {
            return fail(CertboxStatus::NullPointer, "null argument");
        }
        let r = &*result;
        if r.point.is_empty() {
            return fail(CertboxStatus::InvalidArgument, "no point for an unknown outcome");
        }
        if n != r.point.len() {
            return fail(CertboxStatus::Dimension, format!("expected n = {}", r.point.len()));
        }
        slice::from_raw_parts_mut(out, n).copy_from_slice(&r.point);
        CertboxStatus::Ok
    })
}

/// Covers `outer` minus the interior of `inner` with at most `2n` boxes.
/// Piece `i` is written to `out_lo[i*n..(i+1)*n]` and `out_hi[i*n..(i+1)*n]`;
/// `capacity` is the number of pieces the buffers hold. `count` receives the
/// number of pieces, also when the buffers are too small.
///
/// # Safety
///
/// Input arrays must hold `n` doubles, output arrays `capacity * n`.
#[no_mangle]
pub unsafe extern "C" fn certbox_split_complement(
    outer_lo: *const f64,
    outer_hi: *const f64,
    inner_lo: *const f64,
    inner_hi: *const f64,
    n: usize,
    out_lo: *mut f64,
    out_hi: *mut f64,
    capacity: usize,
    count: *mut usize,
) -> CertboxStatus {
    guard(|| {
        if [outer_lo, outer_hi, inner_lo, inner_hi].iter().any(|p| p.is_null()) || count.is_null() {
            return fail(CertboxStatus::NullPointer, "null argument");
        }
        let make = |lo: *const f64, hi: *const f64| {
            BoxVec::from_bounds(slice::from_raw_parts(lo, n), slice::from_raw_parts(hi, n))
        };
        let (outer, inner) = match (make(outer_lo, outer_hi), make(inner_lo, inner_hi)) {
            (Ok(o), Ok(i)) => (o, i),
            (Err(e), _) | (_, Err(e)) => return fail(CertboxStatus::InvalidArgument, e.to_string()),
        };
        let pieces = match split_complement(&outer, &inner) {
            Ok(p) => p,
            Err(e) => return fail(CertboxStatus::InvalidArgument, e.to_string()),
        };
        *count = pieces.len();
        if pieces.len() > capacity {
            return fail(
                CertboxStatus::BufferTooSmall,
                format!("{} pieces, capacity {capacity}", pieces.len()),
            );
        }
        if !pieces.is_empty() && (out_lo.is_null() || out_hi.is_null()) {
            return fail(CertboxStatus::NullPointer, "null output buffer");
        }
        for (i, piece) in pieces.iter().enumerate() {
            slice::from_raw_parts_mut(out_lo.add(i * n), n).copy_from_slice(&piece.lo());
            slice::from_raw_parts_mut(out_hi.add(i * n), n).copy_from_slice(&piece.hi());
        }
        CertboxStatus::Ok
    })
}
