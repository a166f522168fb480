use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use parabolic::lookup::LookupTable;
use parabolic::relax::{
    build_relaxation, find_substitutable, function_census, gap_metrics, parse_instance, parse_solver_result,
    to_lp_quadratic, GapReport, MinlpInstance, RelaxedInstance, Variant,
};
use serde_json::{json, Map, Value};

use crate::fitting::TABLE_ENV;
use crate::io::{self, emit, pretty, require_file, Failure};

const VARIANTS: [Variant; 3] = [Variant::Orig, Variant::Para, Variant::Both];

#[derive(Args, Debug)]
pub struct RelaxArgs {
    /// Instance files in the JSON instance format.
    #[arg(long, num_args = 1.., required = true)]
    pub instance: Vec<PathBuf>,
    #[arg(long, env = TABLE_ENV)]
    pub table: Option<PathBuf>,
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Fill the gap report with the grid oracle at this many steps per axis.
    #[arg(long)]
    pub oracle_grid: Option<usize>,
    /// Directory of `<instance>.<variant>.txt` solver results.
    #[arg(long, conflicts_with = "oracle_grid")]
    pub results: Option<PathBuf>,
    /// Also write LP files for variants that are quadratic.
    #[arg(long)]
    pub lp: bool,
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "instance".into())
}

fn load_instance(path: &Path) -> Result<MinlpInstance, Failure> {
    require_file(path)?;
    parse_instance(&io::read(path)?).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn csv_field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

struct GapRow {
    instance: String,
    variant: Variant,
    gap: Option<GapReport>,
    status: String,
}

fn write_gaps(path: &Path, rows: &[GapRow]) -> Result<(), Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io_err = |e: csv::Error| Failure::Internal(e.to_string());
    w.write_record(["instance", "variant", "status", "time", "c_star", "d", "absgap", "relgap"])
        .map_err(io_err)?;
    for r in rows {
        let g = r.gap.as_ref();
        w.write_record([
            r.instance.clone(),
            r.variant.as_str().to_string(),
            r.status.clone(),
            csv_field(g.and_then(|g| g.time)),
            csv_field(g.map(|g| g.c_star)),
            csv_field(g.map(|g| g.d)),
            csv_field(g.map(|g| g.absgap)),
            csv_field(g.map(|g| g.relgap)),
        ])
        .map_err(io_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Internal(e.to_string()))?;
    io::write(path, &String::from_utf8_lossy(&bytes))
}

fn oracle_rows(name: &str, variants: &[(Variant, RelaxedInstance)], grid: usize, timing: &mut Map<String, Value>) -> Result<Vec<GapRow>, Failure> {
    let mut values = Vec::new();
    for (v, rel) in variants {
        let t = Instant::now();
        let r = rel.oracle(grid)?;
        timing.insert(format!("{name}.{}", v.as_str()), json!(t.elapsed().as_secs_f64()));
        values.push(r.value);
    }
    // best known value from orig; each variant's optimum is its bound
    let c_star = values[0];
    Ok(variants
        .iter()
        .zip(&values)
        .map(|((v, _), d)| {
            let (gap, status) = match (c_star, d) {
                (Some(c), Some(d)) => (Some(gap_metrics(c, *d)), "oracle".to_string()),
                (Some(c), None) => (Some(gap_metrics(c, f64::INFINITY)), "oracle_infeasible".into()),
                (None, _) => (None, "orig_infeasible".into()),
            };
            GapRow {
                instance: name.to_string(),
                variant: *v,
                gap,
                status,
            }
        })
        .collect())
}

fn result_rows(name: &str, dir: &Path) -> Result<Vec<GapRow>, Failure> {
    let mut rows = Vec::new();
    for v in VARIANTS {
        let path = dir.join(format!("{name}.{}.txt", v.as_str()));
        if !path.is_file() {
            continue;
        }
        let r = parse_solver_result(&io::read(&path)?).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        rows.push(GapRow {
            instance: name.to_string(),
            variant: v,
            gap: r.gap(),
            status: r.status.clone(),
        });
    }
    Ok(rows)
}

pub fn relax(a: RelaxArgs) -> Result<(), Failure> {
    if !(a.eps > 0.0) {
        return Err(Failure::Config("--eps must be positive".into()));
    }
    if a.oracle_grid == Some(0) {
        return Err(Failure::Config("--oracle-grid must be positive".into()));
    }
    let table_path = a
        .table
        .clone()
        .ok_or_else(|| Failure::Config(format!("give --table or set {TABLE_ENV}")))?;
    require_file(&table_path)?;
    let mut table = LookupTable::load(&table_path)?;
    let instances = a
        .instance
        .iter()
        .map(|p| Ok((stem(p), load_instance(p)?)))
        .collect::<Result<Vec<_>, Failure>>()?;

    let mut rows = Vec::new();
    let mut timing = Map::new();
    for (name, inst) in &instances {
        let plan = find_substitutable(inst, &mut table, a.eps)?;
        let variants = VARIANTS
            .iter()
            .map(|v| Ok((*v, build_relaxation(inst, &plan, *v)?)))
            .collect::<Result<Vec<_>, parabolic::Error>>()?;
        let mut warnings = Vec::new();
        // files keep the requested variant name, also after a fallback to orig
        for (v, rel) in &variants {
            let v = v.as_str();
            io::write(&a.out_dir.join(format!("{name}.{v}.json")), &rel.instance.to_json_string())?;
            if a.lp {
                match to_lp_quadratic(&rel.instance) {
                    Ok(text) => io::write(&a.out_dir.join(format!("{name}.{v}.lp")), &text)?,
                    Err(e) => warnings.push(format!("{v}: no LP file ({e})")),
                }
            }
            warnings.extend(rel.warnings.iter().cloned());
        }
        let log = json!({
            "instance": name,
            "epsilon": a.eps,
            "substitutions": variants[1].1.substitutions,
            "skipped": plan.skipped,
            "warnings": warnings,
        });
        io::write(&a.out_dir.join(format!("{name}.plan.json")), &pretty(&log)?)?;
        for w in &warnings {
            eprintln!("parabolic: {name}: {w}");
        }
        if let Some(grid) = a.oracle_grid {
            rows.extend(oracle_rows(name, &variants, grid, &mut timing)?);
        } else if let Some(dir) = &a.results {
            rows.extend(result_rows(name, dir)?);
        }
    }
    if a.oracle_grid.is_some() || a.results.is_some() {
        let path = a.out_dir.join("gaps.csv");
        write_gaps(&path, &rows)?;
        io::write_sidecar(&path, json!({ "oracle_time_s": Value::Object(timing) }))?;
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct CensusArgs {
    #[arg(long, num_args = 1.., required = true)]
    pub instance: Vec<PathBuf>,
    /// CSV file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn census(a: CensusArgs) -> Result<(), Failure> {
    let instances = a.instance.iter().map(|p| load_instance(p)).collect::<Result<Vec<_>, _>>()?;
    let counts = function_census(&instances);
    let mut text = String::from("func,count\n");
    for (f, c) in counts {
        text.push_str(&format!("{f},{c}\n"));
    }
    emit(a.out.as_deref(), &text)
}
