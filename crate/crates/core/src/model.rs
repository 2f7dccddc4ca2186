//! Quadratic constraint satisfaction problems.
//!
//! A problem asks for `x` in a finite box with `F_k(x) = c_k^T x + x^T C_k x`
//! inside the range `F_k` for every constraint `k`. The quadratic
//! coefficient matrices are stored lower triangular.

use nalgebra::DMatrix;
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::interval::{BoxVec, Interval, IntervalError, Rounding};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{what}: expected length {expected}, got {got}")]
    Dimension { what: String, expected: usize, got: usize },
    #[error("C[{k}][{i}][{j}] = {value} lies above the diagonal; quadratic matrices must be lower triangular")]
    NotLowerTriangular { k: usize, i: usize, j: usize, value: f64 },
    #[error("domain component {i} must be finite")]
    InfiniteDomain { i: usize },
    #[error("{path}: {msg}")]
    Field { path: String, msg: String },
    #[error("invalid problem text: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Interval(#[from] IntervalError),
}

fn field_err(path: impl Into<String>, msg: impl Into<String>) -> ModelError {
    ModelError::Field {
        path: path.into(),
        msg: msg.into(),
    }
}

/// Problem data: `m` quadratic constraints over `n` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticCsp {
    linear: Vec<Vec<f64>>,
    quad: Vec<DMatrix<f64>>,
    ranges: Vec<Interval>,
    domain: BoxVec,
}

impl QuadraticCsp {
    /// Builds a problem, checking dimensions, triangularity and finiteness of
    /// the domain.
    pub fn new(
        linear: Vec<Vec<f64>>,
        quad: Vec<DMatrix<f64>>,
        ranges: Vec<Interval>,
        domain: BoxVec,
    ) -> Result<Self, ModelError> {
        let n = domain.dim();
        let m = ranges.len();
        check_len("c", m, linear.len())?;
        check_len("C", m, quad.len())?;
        for (k, ck) in linear.iter().enumerate() {
            check_len(&format!("c[{k}]"), n, ck.len())?;
            if let Some(j) = ck.iter().position(|v| !v.is_finite()) {
                return Err(field_err(format!("c[{k}][{j}]"), "must be finite"));
            }
        }
        for (k, ck) in quad.iter().enumerate() {
            if ck.nrows() != n || ck.ncols() != n {
                return Err(ModelError::Dimension {
                    what: format!("C[{k}]"),
                    expected: n,
                    got: if ck.nrows() != n { ck.nrows() } else { ck.ncols() },
                });
            }
            for i in 0..n {
                for j in 0..n {
                    let v = ck[(i, j)];
                    if !v.is_finite() {
                        return Err(field_err(format!("C[{k}][{i}][{j}]"), "must be finite"));
                    }
                    if j > i && v != 0.0 {
                        return Err(ModelError::NotLowerTriangular { k, i, j, value: v });
                    }
                }
            }
        }
        if let Some(i) = domain.iter().position(|c| !c.is_finite()) {
            return Err(ModelError::InfiniteDomain { i });
        }
        Ok(Self {
            linear,
            quad,
            ranges,
            domain,
        })
    }

    pub fn n(&self) -> usize {
        self.domain.dim()
    }

    pub fn m(&self) -> usize {
        self.ranges.len()
    }

    /// Number of entries of the augmentation matrices `(R, S)`; always `n^2`.
    pub fn w_dim(&self) -> usize {
        let n = self.n();
        n * (n + 1) / 2 + n * (n.saturating_sub(1)) / 2
    }

    pub fn linear(&self, k: usize) -> &[f64] {
        &self.linear[k]
    }

    pub fn quad(&self, k: usize) -> &DMatrix<f64> {
        &self.quad[k]
    }

    pub fn range(&self, k: usize) -> Interval {
        self.ranges[k]
    }

    pub fn ranges(&self) -> &[Interval] {
        &self.ranges
    }

    pub fn domain(&self) -> &BoxVec {
        &self.domain
    }

    /// Same constraints over a different domain.
    pub fn with_domain(&self, domain: BoxVec) -> Result<Self, ModelError> {
        check_len("domain", self.n(), domain.dim())?;
        if let Some(i) = domain.iter().position(|c| !c.is_finite()) {
            return Err(ModelError::InfiniteDomain { i });
        }
        Ok(Self { domain, ..self.clone() })
    }

    /// Same data with the range of constraint `k` replaced.
    pub fn with_range(&self, k: usize, range: Interval) -> Self {
        let mut out = self.clone();
        out.ranges[k] = range;
        out
    }

    /// A constraint with range `[-inf, inf]` restricts nothing.
    pub fn is_vacuous(&self, k: usize) -> bool {
        let r = self.ranges[k];
        r.lo() == f64::NEG_INFINITY && r.hi() == f64::INFINITY
    }

    fn check_point(&self, x: &[f64]) -> Result<(), ModelError> {
        check_len("x", self.n(), x.len())
    }

    pub fn eval_k(&self, k: usize, x: &[f64]) -> f64 {
        let c = &self.linear[k];
        let q = &self.quad[k];
        let n = self.n();
        let mut v = 0.0;
        for i in 0..n {
            v += c[i] * x[i];
        }
        for i in 0..n {
            for j in 0..=i {
                v += x[i] * q[(i, j)] * x[j];
            }
        }
        v
    }

    /// `F(x)` for all constraints.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_point(x)?;
        Ok((0..self.m()).map(|k| self.eval_k(k, x)).collect())
    }

    /// Interval enclosure of `F_k` over `bx` by naive interval evaluation.
    pub fn eval_k_interval(&self, k: usize, bx: &BoxVec, rounding: Rounding) -> Result<Interval, IntervalError> {
        let c = &self.linear[k];
        let q = &self.quad[k];
        let n = self.n();
        let mut acc = Interval::point(0.0);
        for i in 0..n {
            acc = acc.try_add(bx[i].scale(c[i], rounding), rounding)?;
        }
        for i in 0..n {
            for j in 0..=i {
                let prod = bx[i].try_mul(bx[j], rounding)?.scale(q[(i, j)], rounding);
                acc = acc.try_add(prod, rounding)?;
            }
        }
        Ok(acc)
    }

    /// `x` lies in the domain and every `F_k(x)` lies in its range.
    pub fn is_feasible(&self, x: &[f64]) -> bool {
        if !self.domain.contains(x) {
            return false;
        }
        (0..self.m()).all(|k| self.ranges[k].contains(self.eval_k(k, x)))
    }

    /// Slope row `F_k[z, x] = c_k^T + x^T C_k + z^T C_k^T`, satisfying
    /// `F_k(x) - F_k(z) = F_k[z, x] (x - z)`.
    pub fn slope_row(&self, k: usize, z: &[f64], x: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_point(z)?;
        self.check_point(x)?;
        let c = &self.linear[k];
        let q = &self.quad[k];
        let n = self.n();
        Ok((0..n)
            .map(|j| {
                let mut s = c[j];
                for i in 0..n {
                    // (x^T C)_j = sum_i x_i C_ij,  (z^T C^T)_j = sum_i z_i C_ji
                    s += x[i] * q[(i, j)] + z[i] * q[(j, i)];
                }
                s
            })
            .collect())
    }

    /// Gradient of `F_k` at `z`: `c_k + (C_k + C_k^T) z`.
    pub fn gradient_k(&self, k: usize, z: &[f64]) -> Vec<f64> {
        let c = &self.linear[k];
        let q = &self.quad[k];
        let n = self.n();
        (0..n)
            .map(|j| {
                let mut s = c[j];
                for i in 0..n {
                    s += (q[(j, i)] + q[(i, j)]) * z[i];
                }
                s
            })
            .collect()
    }
}

fn check_len(what: &str, expected: usize, got: usize) -> Result<(), ModelError> {
    if expected != got {
        return Err(ModelError::Dimension {
            what: what.to_string(),
            expected,
            got,
        });
    }
    Ok(())
}

/// Options for reading problem files.
#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Fold entries above the diagonal onto the lower triangle
    /// (`C_ji += C_ij`) instead of rejecting them.
    pub fold_upper: bool,
}

/// Result of parsing: the problem plus any non-fatal warnings.
#[derive(Debug, Clone)]
pub struct Parsed {
    pub csp: QuadraticCsp,
    pub warnings: Vec<String>,
}

pub fn parse_problem(text: &str) -> Result<QuadraticCsp, ModelError> {
    parse_problem_with(text, ParseOptions::default()).map(|p| p.csp)
}

pub fn parse_problem_with(text: &str, opts: ParseOptions) -> Result<Parsed, ModelError> {
    let root: Value = serde_json::from_str(text)?;
    let obj = root.as_object().ok_or_else(|| field_err("$", "expected an object"))?;
    let n = get_usize(obj, "n")?;
    let m = get_usize(obj, "m")?;

    let c_rows = get_array(obj, "c", m)?;
    let mut linear = Vec::with_capacity(m);
    for (k, row) in c_rows.iter().enumerate() {
        let path = format!("c[{k}]");
        let row = as_array(row, &path, n)?;
        linear.push(
            row.iter()
                .enumerate()
                .map(|(j, v)| as_finite(v, &format!("{path}[{j}]")))
                .collect::<Result<Vec<_>, _>>()?,
        );
    }

    let mut warnings = Vec::new();
    let c_mats = get_array(obj, "C", m)?;
    let mut quad = Vec::with_capacity(m);
    for (k, mat) in c_mats.iter().enumerate() {
        let path = format!("C[{k}]");
        let rows = as_array(mat, &path, n)?;
        let mut q = DMatrix::zeros(n, n);
        for (i, row) in rows.iter().enumerate() {
            let rpath = format!("{path}[{i}]");
            let row = as_array(row, &rpath, n)?;
            for (j, v) in row.iter().enumerate() {
                q[(i, j)] = as_finite(v, &format!("{rpath}[{j}]"))?;
            }
        }
        for i in 0..n {
            for j in i + 1..n {
                let v = q[(i, j)];
                if v == 0.0 {
                    continue;
                }
                if !opts.fold_upper {
                    return Err(ModelError::NotLowerTriangular { k, i, j, value: v });
                }
                q[(j, i)] += v;
                q[(i, j)] = 0.0;
                warnings.push(format!("C[{k}][{i}][{j}] = {v} folded onto C[{k}][{j}][{i}]"));
            }
        }
        quad.push(q);
    }

    let f_rows = get_array(obj, "F", m)?;
    let mut ranges = Vec::with_capacity(m);
    for (k, r) in f_rows.iter().enumerate() {
        ranges.push(parse_interval(r, &format!("F[{k}]"), true)?);
    }

    let x_rows = get_array(obj, "x", n)?;
    let mut domain = Vec::with_capacity(n);
    for (i, r) in x_rows.iter().enumerate() {
        domain.push(parse_interval(r, &format!("x[{i}]"), false)?);
    }

    let csp = QuadraticCsp::new(linear, quad, ranges, BoxVec::new(domain))?;
    for k in 0..csp.m() {
        if csp.is_vacuous(k) {
            warnings.push(format!("F[{k}] = [-inf, inf] is vacuous"));
        }
    }
    Ok(Parsed { csp, warnings })
}

fn get_usize(obj: &Map<String, Value>, key: &str) -> Result<usize, ModelError> {
    obj.get(key)
        .ok_or_else(|| field_err(key, "missing"))?
        .as_u64()
        .map(|v| v as usize)
        .ok_or_else(|| field_err(key, "expected a non-negative integer"))
}

fn get_array<'a>(obj: &'a Map<String, Value>, key: &str, len: usize) -> Result<&'a Vec<Value>, ModelError> {
    let v = obj.get(key).ok_or_else(|| field_err(key, "missing"))?;
    as_array(v, key, len)
}

fn as_array<'a>(v: &'a Value, path: &str, len: usize) -> Result<&'a Vec<Value>, ModelError> {
    let arr = v.as_array().ok_or_else(|| field_err(path, "expected an array"))?;
    if arr.len() != len {
        return Err(field_err(path, format!("expected {len} entries, got {}", arr.len())));
    }
    Ok(arr)
}

fn as_number(v: &Value, path: &str, allow_inf: bool) -> Result<f64, ModelError> {
    match v {
        Value::Number(x) => x.as_f64().ok_or_else(|| field_err(path, "number out of range")),
        Value::String(s) if allow_inf => match s.as_str() {
            "inf" | "+inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            _ => Err(field_err(path, format!("unrecognised value {s:?}"))),
        },
        _ => Err(field_err(path, "expected a number")),
    }
}

fn as_finite(v: &Value, path: &str) -> Result<f64, ModelError> {
    as_number(v, path, false)
}

fn parse_interval(v: &Value, path: &str, allow_inf: bool) -> Result<Interval, ModelError> {
    let pair = as_array(v, path, 2)?;
    let lo = as_number(&pair[0], &format!("{path}[0]"), allow_inf)?;
    let hi = as_number(&pair[1], &format!("{path}[1]"), allow_inf)?;
    Interval::new(lo, hi).map_err(|_| field_err(path, format!("lower bound {lo} exceeds upper bound {hi}")))
}

fn bound_value(x: f64) -> Value {
    if x == f64::INFINITY {
        json!("inf")
    } else if x == f64::NEG_INFINITY {
        json!("-inf")
    } else {
        json!(x)
    }
}

/// Writes `csp` in the problem file format.
pub fn serialize_problem(csp: &QuadraticCsp) -> String {
    let n = csp.n();
    let quad: Vec<Value> = (0..csp.m())
        .map(|k| {
            let q = csp.quad(k);
            Value::Array(
                (0..n)
                    .map(|i| Value::Array((0..n).map(|j| json!(q[(i, j)])).collect()))
                    .collect(),
            )
        })
        .collect();
    let doc = json!({
        "n": n,
        "m": csp.m(),
        "c": csp.linear,
        "C": quad,
        "F": csp.ranges.iter().map(|r| json!([bound_value(r.lo()), bound_value(r.hi())])).collect::<Vec<_>>(),
        "x": csp.domain.iter().map(|r| json!([r.lo(), r.hi()])).collect::<Vec<_>>(),
    });
    serde_json::to_string_pretty(&doc).expect("problem data serializes")
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use proptest::prelude::*;

    const PLANE_TEXT: &str = r#"{ "n": 2, "m": 2,
      "c": [[1,-3],[4,2]],
      "C": [ [[2,0],[3,4]], [[-1,0],[-2,7]] ],
      "F": [[-1,7],[-2,0]],
      "x": [[-3,3],[-4,4]] }"#;

    #[test]
    fn evaluates_plane_instance() {
        let csp = plane_instance();
        let f = csp.eval(&[1.0, 1.0]).unwrap();
        assert_eq!(f[0], 7.0);
        // F_2 = -x1^2 + 4x1 - 2x1x2 + 2x2 + 7x2^2
        assert_eq!(f[1], -1.0 + 4.0 - 2.0 + 2.0 + 7.0);
        assert_eq!(csp.eval(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert!(csp.eval(&[0.0]).is_err());
        assert_eq!(csp.w_dim(), 4);
    }

    #[test]
    fn evaluates_line_instance() {
        let csp = line_instance(-2.0, 1.0);
        assert_eq!(csp.eval(&[-1.0]).unwrap(), vec![-0.5]);
    }

    #[test]
    fn feasibility() {
        assert!(line_instance(-2.0, 1.0).is_feasible(&[0.0]));
        assert!(!line_instance(-2.0, -1.0).is_feasible(&[0.0]));
        assert!(!line_instance(-2.0, 1.0).is_feasible(&[2.5]));
    }

    #[test]
    fn slope_examples() {
        let line = line_instance(-2.0, -1.0);
        assert_eq!(line.slope_row(0, &[0.0], &[2.0]).unwrap(), vec![2.0]);
        assert_eq!(line.eval_k(0, &[2.0]) - line.eval_k(0, &[0.0]), 2.0 * 2.0);

        let plane = plane_instance();
        assert_eq!(plane.slope_row(0, &[0.0, 0.0], &[1.0, 1.0]).unwrap(), vec![6.0, 1.0]);
        // x = z gives the gradient
        let z = [0.3, -1.2];
        assert_eq!(plane.slope_row(1, &z, &z).unwrap(), plane.gradient_k(1, &z));
    }

    #[test]
    fn parses_plane_file() {
        let csp = parse_problem(PLANE_TEXT).unwrap();
        assert_eq!(csp, plane_instance());
        assert_eq!(csp.domain().to_string(), "[-3,3]x[-4,4]");
        assert_eq!(csp.range(1), Interval::from([-2.0, 0.0]));
    }

    #[test]
    fn rejects_upper_entries() {
        let text = PLANE_TEXT.replace("[[-1,0],[-2,7]]", "[[-1,5],[-2,7]]");
        match parse_problem(&text) {
            Err(ModelError::NotLowerTriangular { k, i, j, .. }) => {
                assert_eq!((k, i, j), (1, 0, 1))
            }
            other => panic!("unexpected {other:?}"),
        }
        let folded = parse_problem_with(&text, ParseOptions { fold_upper: true }).unwrap();
        assert_eq!(folded.csp.quad(1)[(1, 0)], 3.0);
        assert_eq!(folded.warnings.len(), 1);
    }

    #[test]
    fn descriptive_errors() {
        let bad = PLANE_TEXT.replace("[[-1,7],[-2,0]]", "[[-1,7],[2,0]]");
        let err = parse_problem(&bad).unwrap_err().to_string();
        assert!(err.starts_with("F[1]"), "{err}");
        let bad = PLANE_TEXT.replace("[[1,-3],[4,2]]", "[[1,-3],[4]]");
        let err = parse_problem(&bad).unwrap_err().to_string();
        assert!(err.starts_with("c[1]"), "{err}");
        let bad = PLANE_TEXT.replace("\"x\"", "\"y\"");
        assert!(parse_problem(&bad).unwrap_err().to_string().starts_with("x:"));
    }

    #[test]
    fn infinite_ranges_round_trip() {
        let text = PLANE_TEXT.replace("[[-1,7],[-2,0]]", r#"[["-inf",7],["-inf","inf"]]"#);
        let parsed = parse_problem_with(&text, ParseOptions::default()).unwrap();
        assert_eq!(parsed.csp.range(0).lo(), f64::NEG_INFINITY);
        assert!(parsed.csp.is_vacuous(1));
        assert_eq!(parsed.warnings.len(), 1);
        let again = parse_problem(&serialize_problem(&parsed.csp)).unwrap();
        assert_eq!(again, parsed.csp);
    }

    fn random_csp() -> impl Strategy<Value = QuadraticCsp> {
        (1usize..4, 1usize..4).prop_flat_map(|(n, m)| {
            (
                prop::collection::vec(prop::collection::vec(-5.0..5.0f64, n), m),
                prop::collection::vec(prop::collection::vec(-5.0..5.0f64, n * n), m),
                prop::collection::vec((-5.0..5.0f64, 0.0..3.0f64, 0u8..4), m),
                prop::collection::vec((-3.0..3.0f64, 0.1..3.0f64), n),
            )
                .prop_map(move |(c, q, f, x)| {
                    let quad = q
                        .into_iter()
                        .map(|v| DMatrix::from_row_slice(n, n, &v).lower_triangle())
                        .collect();
                    let ranges = f
                        .into_iter()
                        .map(|(lo, w, kind)| match kind {
                            0 => Interval::new(f64::NEG_INFINITY, lo + w).unwrap(),
                            1 => Interval::new(lo, f64::INFINITY).unwrap(),
                            _ => Interval::new(lo, lo + w).unwrap(),
                        })
                        .collect();
                    let dom = x
                        .into_iter()
                        .map(|(lo, w)| Interval::new(lo, lo + w).unwrap())
                        .collect();
                    QuadraticCsp::new(c, quad, ranges, dom).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn serialize_parse_round_trip(csp in random_csp()) {
            prop_assert_eq!(parse_problem(&serialize_problem(&csp)).unwrap(), csp);
        }

        #[test]
        fn slope_identity(csp in random_csp(), s in prop::collection::vec(0.0..=1.0f64, 6)) {
            let n = csp.n();
            let dom = csp.domain();
            let pick = |off: usize| -> Vec<f64> {
                (0..n).map(|i| dom[i].lo() + s[(off + i) % 6] * dom[i].width()).collect()
            };
            let z = pick(0);
            let x = pick(3);
            for k in 0..csp.m() {
                let row = csp.slope_row(k, &z, &x).unwrap();
                let lin: f64 = row.iter().zip(x.iter().zip(&z)).map(|(r, (a, b))| r * (a - b)).sum();
                let fx = csp.eval_k(k, &x);
                let diff = fx - csp.eval_k(k, &z);
                prop_assert!((diff - lin).abs() <= 1e-10 * (1.0 + fx.abs()));
            }
        }

        #[test]
        fn interval_evaluation_encloses(csp in random_csp(), s in prop::collection::vec(0.0..=1.0f64, 3)) {
            let dom = csp.domain();
            let x: Vec<f64> = (0..csp.n()).map(|i| dom[i].lo() + s[i] * dom[i].width()).collect();
            for k in 0..csp.m() {
                let enc = csp.eval_k_interval(k, dom, Rounding::Outward).unwrap();
                prop_assert!(enc.contains(csp.eval_k(k, &x)));
            }
        }
    }
}
