use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{ArgAction, Args};
use parabolic::lookup::{LookupTable, TableEntry};
use parabolic::milp::MilpStatus;
use parabolic::parafit::{fit as run_fit, FitReport, Method, SearchOptions};
use parabolic::verify::CERT_TOL;
use parabolic::{BoxDomain, FuncDef, Side};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::io::{self, config_err, emit, parse_real, pretty, require_file, Failure};

pub const TABLE_ENV: &str = "PARABOLIC_TABLE";

#[derive(Args, Debug, Clone)]
pub struct SearchArgs {
    #[arg(long, default_value = "practical")]
    pub method: Method,
    /// Wall-clock cap per MILP solve, in seconds.
    #[arg(long)]
    pub solve_time: Option<f64>,
    /// Branch-and-bound node cap per MILP solve.
    #[arg(long)]
    pub solve_nodes: Option<u64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long)]
    pub max_binaries: Option<usize>,
    #[arg(long)]
    pub max_continuous: Option<usize>,
    /// Refine the width grid on a one-sidedness failure, the point grid on a coverage failure.
    #[arg(long)]
    pub swap_growth: bool,
    #[arg(long)]
    pub no_lift: bool,
    #[arg(long)]
    pub no_greedy: bool,
    /// Keep every quadratic coefficient of the below form nonpositive.
    #[arg(long)]
    pub nonpositive_quadratic: bool,
    #[arg(long)]
    pub initial_cells: Option<usize>,
    /// Tolerance of the final certification.
    #[arg(long)]
    pub cert_tol: Option<f64>,
}

impl SearchArgs {
    fn options(&self) -> Result<SearchOptions, Failure> {
        let positive = |name: &str, v: Option<f64>| match v {
            Some(x) if !(x > 0.0) => Err(Failure::Config(format!("--{name} must be positive"))),
            _ => Ok(()),
        };
        positive("solve-time", self.solve_time)?;
        positive("solve-nodes", self.solve_nodes.map(|v| v as f64))?;
        positive("max-iterations", self.max_iterations.map(|v| v as f64))?;
        positive("max-binaries", self.max_binaries.map(|v| v as f64))?;
        positive("max-continuous", self.max_continuous.map(|v| v as f64))?;
        positive("initial-cells", self.initial_cells.map(|v| v as f64))?;
        positive("cert-tol", self.cert_tol)?;
        let mut o = SearchOptions {
            solve_time_s: self.solve_time,
            solve_nodes: self.solve_nodes,
            swap_growth: self.swap_growth,
            lift: !self.no_lift,
            greedy_start: !self.no_greedy,
            initial_cells: self.initial_cells,
            ..SearchOptions::default()
        };
        o.params.nonpositive_quadratic = self.nonpositive_quadratic;
        if let Some(v) = self.max_iterations {
            o.max_iterations = v;
        }
        if let Some(v) = self.max_binaries {
            o.max_binaries = v;
        }
        if let Some(v) = self.max_continuous {
            o.max_continuous = v;
        }
        if let Some(v) = self.cert_tol {
            o.cert_tol = v;
        }
        Ok(o)
    }
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Registered function: exp, sin, cos, ln, sqrt, cube or zigzag.
    #[arg(long, required_unless_present = "func_file")]
    pub func: Option<String>,
    /// Piecewise-linear function as `{"id", "domain", "breakpoints", "values"}`.
    #[arg(long, conflicts_with = "func")]
    pub func_file: Option<PathBuf>,
    /// `lo hi` of one coordinate, repeated per coordinate; accepts multiples of pi.
    #[arg(long, num_args = 2, allow_hyphen_values = true, action = ArgAction::Append, value_parser = parse_real)]
    pub domain: Vec<f64>,
    #[arg(long)]
    pub eps: f64,
    #[arg(long, default_value = "below")]
    pub side: Side,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Report file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Table receiving the entry.
    #[arg(long, env = TABLE_ENV)]
    pub table: Option<PathBuf>,
}

fn domain_from(values: &[f64]) -> Result<BoxDomain, Failure> {
    if values.is_empty() || values.len() % 2 != 0 {
        return Err(Failure::Config("--domain takes lo hi".into()));
    }
    let lower = values.iter().step_by(2).copied().collect();
    let upper = values.iter().skip(1).step_by(2).copied().collect();
    Ok(BoxDomain::new(lower, upper)?)
}

fn check_eps(eps: f64) -> Result<(), Failure> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Failure::Config(format!("--eps must be positive, got {eps}")))
    }
}

/// Failure class of an uncertified report.
fn outcome(report: &FitReport) -> Result<(), Failure> {
    if report.certified() {
        return Ok(());
    }
    let why = report.failure.clone().unwrap_or_else(|| "not certified".into());
    let msg = format!("{} {} on {} at eps {}: {why}", report.func, report.side, report.domain, report.epsilon);
    let limited = report.iterations.iter().any(|it| {
        matches!(
            it.status,
            MilpStatus::SizeLimit | MilpStatus::TimeLimit | MilpStatus::NodeLimit
        )
    });
    if limited {
        Err(Failure::SolverLimit(msg))
    } else {
        Err(Failure::Certification(msg))
    }
}

fn timing(report: &FitReport) -> Value {
    json!({
        "func": report.func,
        "side": report.side,
        "epsilon": report.epsilon,
        "wall_time_s": report.wall_time_s,
        "iteration_time_s": report.iterations.iter().map(|it| it.time_s).collect::<Vec<_>>(),
    })
}

fn store(table_path: &Path, entries: Vec<TableEntry>) -> Result<(), Failure> {
    let mut table = LookupTable::load(table_path)?;
    for e in entries {
        table.put(e)?;
    }
    if let Some(dir) = table_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| config_err(dir.display(), e))?;
    }
    table.save(table_path)?;
    Ok(())
}

pub fn fit(a: FitArgs) -> Result<(), Failure> {
    check_eps(a.eps)?;
    let opts = a.search.options()?;
    let (func, dom) = match &a.func_file {
        Some(path) => {
            require_file(path)?;
            let (f, d) = FuncDef::from_table_json(&io::read(path)?)?;
            let dom = if a.domain.is_empty() { d } else { domain_from(&a.domain)? };
            (f, dom)
        }
        None => {
            let name = a.func.as_deref().unwrap_or_default();
            (FuncDef::by_name(name)?, domain_from(&a.domain)?)
        }
    };
    let report = run_fit(&func, &dom, a.eps, a.side, a.search.method, &opts)?;
    emit(a.out.as_deref(), &pretty(&report)?)?;
    if let Some(out) = &a.out {
        io::write_sidecar(out, timing(&report))?;
    }
    if let Some(table) = &a.table {
        if report.paraboloids.is_some() && dom.dim() == 1 && a.func_file.is_none() {
            store(table, vec![TableEntry::from_report(&report)?])?;
        } else if report.paraboloids.is_some() {
            eprintln!("parabolic: only registered univariate fits are stored in a table");
        }
    }
    outcome(&report)
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// A single table entry (`func`, `domain`, `eps`, `side`, `coeffs`).
    #[arg(long, required_unless_present = "table")]
    pub coeffs: Option<PathBuf>,
    #[arg(long, env = TABLE_ENV)]
    pub table: Option<PathBuf>,
    #[arg(long, default_value_t = CERT_TOL)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct VerifyLine {
    func: String,
    domain: [f64; 2],
    eps: f64,
    side: Side,
    paraboloids: usize,
    pass: bool,
    /// `max (f − ε − max_l p^l)` in below form.
    c1: f64,
    /// `max_l max (p^l − f)` in below form.
    c2: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    reasons: Vec<String>,
}

fn verify_entry(e: &TableEntry, tol: f64) -> Result<VerifyLine, Failure> {
    let r = e.certify(tol)?;
    Ok(VerifyLine {
        func: e.func.to_string(),
        domain: e.domain,
        eps: e.eps,
        side: e.side,
        paraboloids: e.coeffs.len(),
        pass: r.pass,
        c1: r.c1.value,
        c2: r.c2.iter().map(|c| c.value).fold(f64::NEG_INFINITY, f64::max),
        reasons: r.reasons,
    })
}

pub fn verify(a: VerifyArgs) -> Result<(), Failure> {
    if !(a.tol >= 0.0) {
        return Err(Failure::Config("--tol must be nonnegative".into()));
    }
    let entries = match (&a.coeffs, &a.table) {
        (Some(path), _) => {
            require_file(path)?;
            let e: TableEntry = serde_json::from_str(&io::read(path)?).map_err(|e| config_err(path.display(), e))?;
            e.validate(&path.display().to_string())?;
            vec![e]
        }
        (None, Some(path)) => {
            require_file(path)?;
            LookupTable::from_json(&io::read(path)?)?.entries
        }
        (None, None) => return Err(Failure::Config("give --coeffs or --table".into())),
    };
    let lines = entries
        .par_iter()
        .map(|e| verify_entry(e, a.tol))
        .collect::<Result<Vec<_>, _>>()?;
    emit(a.out.as_deref(), &pretty(&lines)?)?;
    let failed: Vec<String> = lines
        .iter()
        .filter(|l| !l.pass)
        .map(|l| format!("{} {} [{}, {}] eps {}", l.func, l.side, l.domain[0], l.domain[1], l.eps))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Certification(format!("not certified: {}", failed.join("; "))))
    }
}

#[derive(Args, Debug)]
pub struct TableArgs {
    /// Job matrix, see the README.
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long, env = TABLE_ENV)]
    pub table: Option<PathBuf>,
    /// Directory for one report per job.
    #[arg(long)]
    pub report_dir: Option<PathBuf>,
    #[command(flatten)]
    pub search: SearchArgs,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Real {
    Num(f64),
    Text(String),
}

impl Real {
    fn value(&self) -> Result<f64, Failure> {
        match self {
            Real::Num(v) => Ok(*v),
            Real::Text(s) => parse_real(s).map_err(Failure::Config),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixRow {
    func: String,
    domains: Vec<[Real; 2]>,
    eps: Vec<f64>,
    sides: Vec<Side>,
    #[serde(default)]
    method: Option<Method>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Matrix {
    jobs: Vec<MatrixRow>,
}

struct Job {
    func: FuncDef,
    dom: BoxDomain,
    eps: f64,
    side: Side,
    method: Method,
}

impl Job {
    fn stem(&self) -> String {
        format!(
            "{}_{}_{}_{}_{}",
            self.func.id(),
            self.side,
            self.dom.lower()[0],
            self.dom.upper()[0],
            self.eps
        )
    }
}

fn expand(m: &Matrix, default_method: Method) -> Result<Vec<Job>, Failure> {
    let mut jobs = Vec::new();
    for (i, row) in m.jobs.iter().enumerate() {
        let func = FuncDef::by_name(&row.func).map_err(|e| config_err(format!("jobs[{i}]"), e))?;
        for d in &row.domains {
            let dom = BoxDomain::interval(d[0].value()?, d[1].value()?)?;
            for &eps in &row.eps {
                check_eps(eps)?;
                for &side in &row.sides {
                    jobs.push(Job {
                        func: func.clone(),
                        dom: dom.clone(),
                        eps,
                        side,
                        method: row.method.unwrap_or(default_method),
                    });
                }
            }
        }
    }
    Ok(jobs)
}

pub fn table(a: TableArgs) -> Result<(), Failure> {
    let opts = a.search.options()?;
    require_file(&a.matrix)?;
    let matrix: Matrix = serde_json::from_str(&io::read(&a.matrix)?).map_err(|e| config_err(a.matrix.display(), e))?;
    let table_path = a
        .table
        .clone()
        .ok_or_else(|| Failure::Config(format!("give --table or set {TABLE_ENV}")))?;
    let jobs = expand(&matrix, a.search.method)?;
    let start = Instant::now();
    let results: Vec<Result<FitReport, parabolic::Error>> = jobs
        .par_iter()
        .map(|j| run_fit(&j.func, &j.dom, j.eps, j.side, j.method, &opts))
        .collect();

    // single writer from here on
    let mut entries = Vec::new();
    let mut worst: Result<(), Failure> = Ok(());
    let mut times = serde_json::Map::new();
    for (job, res) in jobs.iter().zip(results) {
        let report = match res {
            Ok(r) => r,
            Err(e) => {
                eprintln!("parabolic: {}: {e}", job.stem());
                worst = worst.and(Err(Failure::from(e)));
                continue;
            }
        };
        times.insert(job.stem(), timing(&report));
        if let Some(dir) = &a.report_dir {
            io::write(&dir.join(format!("{}.json", job.stem())), &pretty(&report)?)?;
        }
        if report.paraboloids.is_some() {
            entries.push(TableEntry::from_report(&report)?);
        }
        let status = match (&report.k_star, report.certified()) {
            (Some(k), true) => format!("K* = {k}"),
            _ => report.failure.clone().unwrap_or_else(|| "not certified".into()),
        };
        println!("{}\t{status}", job.stem());
        if let Err(f) = outcome(&report) {
            worst = match (worst, f) {
                (Err(Failure::SolverLimit(m)), _) | (_, Failure::SolverLimit(m)) => Err(Failure::SolverLimit(m)),
                (Err(prev), _) => Err(prev),
                (Ok(()), f) => Err(f),
            };
        }
    }
    store(&table_path, entries)?;
    io::write_sidecar(
        &table_path,
        json!({ "wall_time_s": start.elapsed().as_secs_f64(), "jobs": Value::Object(times) }),
    )?;
    worst
}
