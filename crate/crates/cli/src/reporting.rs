use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use parabolic::funcspace::{canonical_zigzag, zigzag_generate};
use parabolic::relax::{metrics::DEFAULT_SHIFT, sgm};
use serde_json::json;

use crate::io::{config_err, emit, pretty, require_file, Failure};

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// CSV with `variant` and `time` columns (seconds).
    #[arg(long, required_unless_present = "gaps")]
    pub times: Option<PathBuf>,
    /// CSV with `variant`, `absgap` and `relgap` columns, such as `relax` writes.
    #[arg(long)]
    pub gaps: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SHIFT)]
    pub shift: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Default)]
struct Summary {
    times: Vec<f64>,
    absgaps: Vec<f64>,
    relgaps: Vec<f64>,
}

/// Nonempty values of `columns` per row, keyed by the `variant` column.
fn read_columns(path: &Path, columns: &[&str]) -> Result<Vec<(String, Vec<Option<f64>>)>, Failure> {
    require_file(path)?;
    let err = |e: &dyn std::fmt::Display| config_err(path.display(), e);
    let mut r = csv::Reader::from_path(path).map_err(|e| err(&e))?;
    let headers = r.headers().map_err(|e| err(&e))?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Failure::Config(format!("{}: missing column '{name}'", path.display())))
    };
    let vi = find("variant")?;
    let idx = columns.iter().map(|c| find(c)).collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| err(&e))?;
        let variant = rec.get(vi).unwrap_or_default().trim().to_string();
        let values = idx
            .iter()
            .map(|&i| {
                let s = rec.get(i).unwrap_or_default().trim();
                if s.is_empty() {
                    return Ok(None);
                }
                s.parse::<f64>()
                    .map(Some)
                    .map_err(|_| Failure::Config(format!("{}: row {}: '{s}' is not a number", path.display(), line + 2)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push((variant, values));
    }
    Ok(rows)
}

fn max_of(v: &[f64]) -> String {
    v.iter().copied().reduce(f64::max).map(|x| x.to_string()).unwrap_or_default()
}

pub fn report(a: ReportArgs) -> Result<(), Failure> {
    if !(a.shift > 0.0) {
        return Err(Failure::Config("--shift must be positive".into()));
    }
    let mut by_variant: BTreeMap<String, Summary> = BTreeMap::new();
    if let Some(path) = &a.times {
        for (v, vals) in read_columns(path, &["time"])? {
            let s = by_variant.entry(v).or_default();
            s.times.extend(vals[0]);
        }
    }
    if let Some(path) = &a.gaps {
        for (v, vals) in read_columns(path, &["absgap", "relgap"])? {
            let s = by_variant.entry(v).or_default();
            s.absgaps.extend(vals[0]);
            s.relgaps.extend(vals[1]);
        }
    }
    let mut text = String::from("variant,runs,sgm_time,max_absgap,max_relgap\n");
    for (v, s) in &by_variant {
        let mean = if s.times.is_empty() {
            String::new()
        } else {
            format!("{:.2}", sgm(&s.times, a.shift)?)
        };
        text.push_str(&format!(
            "{v},{},{mean},{},{}\n",
            s.times.len().max(s.absgaps.len()),
            max_of(&s.absgaps),
            max_of(&s.relgaps)
        ));
    }
    emit(a.out.as_deref(), &text)
}

#[derive(Args, Debug)]
pub struct ZigzagArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = -5.0, allow_negative_numbers = true)]
    pub lo: f64,
    #[arg(long, default_value_t = 5.0, allow_negative_numbers = true)]
    pub hi: f64,
    /// Write the fixed 26-point table instead of sampling.
    #[arg(long)]
    pub canonical: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn zigzag(a: ZigzagArgs) -> Result<(), Failure> {
    let (id, data) = if a.canonical {
        ("zigzag".to_string(), canonical_zigzag())
    } else {
        (format!("zigzag_{}", a.seed), zigzag_generate(a.seed, a.lo, a.hi)?)
    };
    let doc = json!({
        "id": id,
        "domain": [data.first(), data.last()],
        "breakpoints": data.breakpoints,
        "values": data.values,
    });
    emit(a.out.as_deref(), &pretty(&doc)?)?;
    Ok(())
}
