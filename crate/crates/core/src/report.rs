//! CSV rows describing processed boxes.

use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoxStatus {
    Excluded,
    Feasible,
    Unknown,
}

impl BoxStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoxStatus::Excluded => "excluded",
            BoxStatus::Feasible => "feasible",
            BoxStatus::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub box_id: usize,
    /// `None` for the root box.
    pub parent_id: Option<usize>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub status: BoxStatus,
    pub f_value: f64,
    pub iterations: usize,
    pub n_calls: u64,
    pub cost: f64,
    pub wall_millis: u64,
}

/// Formats like C's `%.12g`.
pub fn fmt_g(x: f64) -> String {
    const DIGITS: i32 = 12;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent");
    if !(-4..DIGITS).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Header plus one line per row; `n` fixes the number of `lo`/`hi` columns.
pub fn emit_csv(rows: &[ReportRow], n: usize) -> String {
    let mut out = String::from("boxId,parentId");
    for i in 0..n {
        let _ = write!(out, ",lo{i}");
    }
    for i in 0..n {
        let _ = write!(out, ",hi{i}");
    }
    out.push_str(",status,fValue,iterations,nCalls,cost,wallMillis\n");
    for r in rows {
        let _ = write!(
            out,
            "{},{}",
            r.box_id,
            r.parent_id.map(|p| p.to_string()).unwrap_or_default()
        );
        for v in r.lo.iter().chain(&r.hi) {
            let _ = write!(out, ",{}", fmt_g(*v));
        }
        let _ = writeln!(
            out,
            ",{},{},{},{},{},{}",
            r.status.as_str(),
            fmt_g(r.f_value),
            r.iterations,
            r.n_calls,
            fmt_g(r.cost),
            r.wall_millis
        );
    }
    out
}
