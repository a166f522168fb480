use std::collections::BTreeMap;

use serde::Serialize;

use super::expr::Expr;
use super::instance::MinlpInstance;
use crate::error::{Error, Result};

pub const RELGAP_FLOOR: f64 = 1e-10;
pub const DEFAULT_SHIFT: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub c_star: f64,
    pub d: f64,
    pub absgap: f64,
    pub relgap: f64,
    pub time: Option<f64>,
    pub status: String,
}

/// Absolute and relative gap between the best known value `c_star` and the
/// dual bound `d`.
pub fn gap_metrics(c_star: f64, d: f64) -> GapReport {
    let (absgap, relgap) = if d.is_finite() && c_star.is_finite() {
        let a = (c_star - d).abs();
        (a, a / (c_star.abs() + RELGAP_FLOOR))
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    GapReport {
        c_star,
        d,
        absgap,
        relgap,
        time: None,
        status: String::new(),
    }
}

/// Shifted geometric mean `(Π(tᵢ + s))^{1/n} − s`, evaluated as
/// `s·expm1(mean ln1p(tᵢ/s))`.
pub fn sgm(times: &[f64], shift: f64) -> Result<f64> {
    if times.is_empty() {
        return Err(Error::Input("sgm of an empty list".into()));
    }
    if let Some(t) = times.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
        return Err(Error::Input(format!("run time {t} is not a nonnegative number")));
    }
    if !(shift > 0.0) {
        return Err(Error::Input(format!("shift must be positive, got {shift}")));
    }
    // sort so the sum does not depend on input order
    let mut logs: Vec<f64> = times.iter().map(|t| (t / shift).ln_1p()).collect();
    logs.sort_by(f64::total_cmp);
    let mean = logs.iter().sum::<f64>() / logs.len() as f64;
    Ok(shift * mean.exp_m1())
}

/// Counts univariate nonlinear nodes by function id. Squares are left out;
/// any other constant power lands in `"pow"`.
pub fn function_census(instances: &[MinlpInstance]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for inst in instances {
        for c in &inst.constraints {
            c.body.walk(&mut Vec::new(), &mut |e, _| {
                let key = match e {
                    Expr::Unary(u, _) => Some(u.name().to_string()),
                    Expr::Pow(_, p) if *p == 2.0 || *p == 1.0 || *p == 0.0 => None,
                    Expr::Pow(..) => Some("pow".to_string()),
                    _ => None,
                };
                if let Some(k) = key {
                    *counts.entry(k).or_insert(0) += 1;
                }
            });
        }
    }
    counts
}

/// Outcome of one external solver run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverResult {
    pub status: String,
    pub objective: Option<f64>,
    pub dual: Option<f64>,
    pub time: Option<f64>,
}

impl SolverResult {
    pub fn gap(&self) -> Option<GapReport> {
        let c = self.objective?;
        let d = self.dual.unwrap_or(f64::NEG_INFINITY);
        let mut g = gap_metrics(c, d);
        g.time = self.time;
        g.status = self.status.clone();
        Some(g)
    }
}

fn parse_value(v: &str, line: usize) -> Result<f64> {
    match v.to_ascii_lowercase().as_str() {
        "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
        "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
        "" | "none" | "na" | "-" => Ok(f64::NAN),
        s => s
            .parse()
            .map_err(|_| Error::Parse {
                line,
                message: format!("'{v}' is not a number"),
            }),
    }
}

/// Reads `key: value` (or `key = value`) lines with keys `status`,
/// `objective`, `dual` and `time`. Blank lines and `#` comments are skipped.
pub fn parse_solver_result(text: &str) -> Result<SolverResult> {
    let mut r = SolverResult {
        status: "unknown".into(),
        objective: None,
        dual: None,
        time: None,
    };
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once(':')
            .or_else(|| line.split_once('='))
            .ok_or_else(|| Error::Parse {
                line: i + 1,
                message: "expected 'key: value'".into(),
            })?;
        let v = v.trim();
        let num = |v: &str| parse_value(v, i + 1).map(|x| (!x.is_nan()).then_some(x));
        match k.trim().to_ascii_lowercase().as_str() {
            "status" => r.status = v.to_string(),
            "objective" => r.objective = num(v)?,
            "dual" => r.dual = num(v)?,
            "time" => r.time = num(v)?,
            other => {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("unknown key '{other}'"),
                })
            }
        }
    }
    Ok(r)
}
