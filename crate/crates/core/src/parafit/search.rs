use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::grid::GridSpec;
use super::heuristic::greedy_fit;
use super::model::{build_fit_model, FitModel, ModelOptions};
use super::params::{below_form, derive_params, params_for_counts, FitParams, ParamOptions};
use crate::error::{Error, Result};
use crate::funcspace::{Approximable, BoxDomain, FuncDef};
use crate::milp::{solve_milp, MilpStatus, SolveLimits, SolveOptions};
use crate::paraboloid::{ParaboloidSet, Side};
use crate::verify::{certify_max, check_conditions, ConditionReport, CERT_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Practical,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Method::Exact),
            "practical" => Ok(Method::Practical),
            _ => Err(Error::Input(format!("method must be 'exact' or 'practical', got '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchOptions {
    pub params: ParamOptions,
    pub symmetry_break: bool,
    pub max_iterations: usize,
    /// Wall-clock cap per MILP solve, in seconds.
    pub solve_time_s: Option<f64>,
    pub solve_nodes: Option<u64>,
    pub max_binaries: usize,
    pub max_continuous: usize,
    /// Factor applied to `T` or `D` when the adaptive search refines a grid.
    pub growth: f64,
    /// Read the one-sidedness check as `min (p^l − f)` instead of the certified maximum.
    pub literal_min_check: bool,
    /// Refine `D` on a one-sidedness failure and `T` on a coverage failure.
    pub swap_growth: bool,
    pub cert_tol: f64,
    /// Overrides the initial cell count of the adaptive search.
    pub initial_cells: Option<usize>,
    /// Try the greedy run heuristic before branch-and-bound (univariate only).
    pub greedy_start: bool,
    /// Replace each zero-objective point by one with the same selection that
    /// maximizes the total integral of the paraboloids.
    pub lift: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            params: ParamOptions::default(),
            symmetry_break: true,
            max_iterations: 24,
            solve_time_s: None,
            solve_nodes: None,
            max_binaries: 1000,
            max_continuous: 200_000,
            growth: 1.5,
            literal_min_check: false,
            swap_growth: false,
            cert_tol: CERT_TOL,
            initial_cells: None,
            greedy_start: true,
            lift: true,
        }
    }
}

impl SearchOptions {
    fn model_options(&self, drop_slope_neighbors: bool) -> ModelOptions {
        ModelOptions {
            drop_slope_neighbors,
            symmetry_break: self.symmetry_break,
            max_binaries: self.max_binaries,
            max_continuous: self.max_continuous,
        }
    }

    fn solve_options(&self, cutoff: f64) -> SolveOptions {
        SolveOptions {
            limits: SolveLimits {
                time: self.solve_time_s.map(Duration::from_secs_f64),
                nodes: self.solve_nodes,
                max_binaries: self.max_binaries,
                max_continuous: self.max_continuous,
            },
            cutoff: Some(cutoff),
            lazy_rows: true,
            satisfice: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub k: usize,
    pub t_cells: Vec<usize>,
    pub d_cells: Vec<usize>,
    /// Solver status, or `size_limit` when the model was not built.
    pub status: MilpStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    pub nodes: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub c_l: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(skip)]
    pub time_s: f64,
}

/// Everything a fit run produced. Wall times are not serialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub func: String,
    pub domain: BoxDomain,
    pub epsilon: f64,
    pub side: Side,
    pub method: Method,
    pub k_bar: usize,
    pub params: FitParams,
    pub grids: GridSpec,
    pub iterations: Vec<IterationLog>,
    pub k_star: Option<usize>,
    pub paraboloids: Option<ParaboloidSet>,
    pub certification: Option<ConditionReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    #[serde(skip)]
    pub wall_time_s: f64,
}

impl FitReport {
    pub fn certified(&self) -> bool {
        self.certification.as_ref().is_some_and(|c| c.pass) && self.paraboloids.is_some()
    }
}

/// Negates every coefficient; see [`ParaboloidSet::flip`].
pub fn flip_side(set: &ParaboloidSet) -> ParaboloidSet {
    set.flip()
}

/// Threshold below which a fit objective counts as zero.
pub fn zero_tolerance(grids: &GridSpec) -> f64 {
    1e-7 * (grids.int_points.len() as f64).max(1.0)
}

enum Attempt {
    Fit(ParaboloidSet),
    NoFit,
}

fn attempt(
    func: &FuncDef,
    dom: &BoxDomain,
    k: usize,
    params: &FitParams,
    grids: &GridSpec,
    opts: &SearchOptions,
    drop_slope_neighbors: bool,
) -> Result<(Attempt, IterationLog)> {
    let start = Instant::now();
    let mut log = IterationLog {
        k,
        t_cells: grids.t_cells.clone(),
        d_cells: grids.d_cells.clone(),
        status: MilpStatus::SizeLimit,
        objective: None,
        nodes: 0,
        c_l: Vec::new(),
        c_eps: None,
        note: None,
        time_s: 0.0,
    };
    let fm = match build_fit_model(func, dom, k, params, grids, &opts.model_options(drop_slope_neighbors)) {
        Ok(fm) => fm,
        Err(Error::Size { binaries, continuous, .. }) => {
            log.note = Some(format!("{binaries} binaries and {continuous} continuous variables exceed the caps"));
            log.time_s = start.elapsed().as_secs_f64();
            return Ok((Attempt::NoFit, log));
        }
        Err(e) => return Err(e),
    };
    if opts.greedy_start {
        if let Some(x) = greedy_fit(func, dom, &fm, params, grids, !drop_slope_neighbors, zero_tolerance(grids))? {
            log.status = MilpStatus::Feasible;
            log.objective = Some(0.0);
            log.note = Some("fit found by the greedy run heuristic".into());
            let set = select(&fm, &x, dom, grids, opts)?;
            log.time_s = start.elapsed().as_secs_f64();
            return Ok((Attempt::Fit(set), log));
        }
    }
    let sol = solve_milp(&fm.model, &opts.solve_options(zero_tolerance(grids)))?;
    log.status = sol.status;
    log.objective = sol.objective;
    log.nodes = sol.stats.nodes;
    let outcome = match (&sol.values, sol.status) {
        (Some(x), MilpStatus::Optimal | MilpStatus::Feasible) => Attempt::Fit(select(&fm, x, dom, grids, opts)?),
        (_, MilpStatus::TimeLimit | MilpStatus::NodeLimit) => {
            log.note = Some("solver limit reached without a fit; counted as infeasible".into());
            Attempt::NoFit
        }
        _ => Attempt::NoFit,
    };
    log.time_s = start.elapsed().as_secs_f64();
    Ok((outcome, log))
}

/// Paraboloids of a zero-objective point, lifted when enabled.
fn select(fm: &FitModel, x: &[f64], dom: &BoxDomain, grids: &GridSpec, opts: &SearchOptions) -> Result<ParaboloidSet> {
    if opts.lift {
        if let Some(y) = fm.lifted(x, dom, zero_tolerance(grids))? {
            return Ok(fm.extract(&y));
        }
    }
    Ok(fm.extract(x))
}

fn finish(
    mut report: FitReport,
    func: &FuncDef,
    dom: &BoxDomain,
    below: ParaboloidSet,
    k: usize,
    tol: f64,
) -> Result<FitReport> {
    // drop each paraboloid by its certified excess so that p ≤ f holds strictly
    let pre = check_conditions(&below, &below_form(func, report.side), dom, report.epsilon, Side::Below, tol)?;
    let below = if pre.c2.iter().any(|r| r.value > 0.0) {
        ParaboloidSet::new(
            below
                .members
                .iter()
                .zip(&pre.c2)
                .map(|(p, r)| p.lifted(-r.value.max(0.0)))
                .collect(),
        )
    } else {
        below
    };
    let set = match report.side {
        Side::Below => below,
        Side::Above => flip_side(&below),
    };
    let cert = check_conditions(&set, func, dom, report.epsilon, report.side, tol)?;
    if !cert.pass {
        report.failure = Some(format!("certification failed: {}", cert.reasons.join("; ")));
    }
    report.k_star = Some(k);
    report.paraboloids = Some(set);
    report.certification = Some(cert);
    Ok(report)
}

fn empty_report(
    func: &FuncDef,
    dom: &BoxDomain,
    epsilon: f64,
    side: Side,
    method: Method,
    k_bar: usize,
    params: FitParams,
    grids: GridSpec,
) -> FitReport {
    FitReport {
        func: func.label(),
        domain: dom.clone(),
        epsilon,
        side,
        method,
        k_bar,
        params,
        grids,
        iterations: Vec::new(),
        k_star: None,
        paraboloids: None,
        certification: None,
        failure: None,
        wall_time_s: 0.0,
    }
}

/// Smallest `K` for which the full fit model has a zero-objective solution:
/// doubling from `K = 1` until a fit exists, then bisection.
pub fn binary_search_k(func: &FuncDef, dom: &BoxDomain, epsilon: f64, side: Side, opts: &SearchOptions) -> Result<FitReport> {
    let start = Instant::now();
    let (params, grids, k_bar) = derive_params(func, dom, epsilon, side, &opts.params)?;
    let mut report = empty_report(func, dom, epsilon, side, Method::Exact, k_bar, params.clone(), grids.clone());

    // largest K known to fail and smallest K known to fit
    let mut lo = 0usize;
    let mut hi: Option<(usize, ParaboloidSet)> = None;
    let mut ceiling = k_bar;
    let mut k = 1usize;
    loop {
        if report.iterations.len() >= opts.max_iterations {
            report.failure = Some(format!("iteration limit {} reached", opts.max_iterations));
            break;
        }
        let (outcome, log) = attempt(func, dom, k, &params, &grids, opts, false)?;
        let sized_out = log.status == MilpStatus::SizeLimit;
        report.iterations.push(log);
        match outcome {
            Attempt::Fit(set) => hi = Some((k, set)),
            Attempt::NoFit if sized_out => ceiling = k - 1,
            Attempt::NoFit => lo = k,
        }
        k = match &hi {
            None => {
                if lo >= ceiling {
                    report.failure = Some(format!("no fit with at most {ceiling} paraboloids"));
                    break;
                }
                if sized_out {
                    (lo + ceiling).div_ceil(2).max(lo + 1)
                } else {
                    (2 * k).min(ceiling)
                }
            }
            Some((h, _)) => {
                if *h <= lo + 1 {
                    break;
                }
                (lo + h) / 2
            }
        };
    }
    report.wall_time_s = start.elapsed().as_secs_f64();
    match hi {
        Some((k, set)) if report.failure.is_none() => {
            let mut r = finish(report, func, dom, set, k, opts.cert_tol)?;
            r.wall_time_s = start.elapsed().as_secs_f64();
            Ok(r)
        }
        _ => Ok(report),
    }
}

fn initial_cells(dom: &BoxDomain, epsilon: f64, lipschitz: f64, opts: &SearchOptions) -> Vec<usize> {
    (0..dom.dim())
        .map(|i| {
            opts.initial_cells
                .unwrap_or_else(|| (lipschitz * dom.width(i) / (10.0 * epsilon)).ceil() as usize)
                .max(1)
        })
        .collect()
}

fn grow(cells: &[usize], factor: f64) -> Vec<usize> {
    cells
        .iter()
        .map(|&c| ((c as f64 * factor).ceil() as usize).max(c + 1))
        .collect()
}

/// Adaptive search: solve the fit model without the neighbourhood slope
/// rows on coarse grids, certify, shift and refine.
pub fn practical_search_k(func: &FuncDef, dom: &BoxDomain, epsilon: f64, side: Side, opts: &SearchOptions) -> Result<FitReport> {
    let start = Instant::now();
    let (base_params, base_grids, k_bar) = derive_params(func, dom, epsilon, side, &opts.params)?;
    let mut report = empty_report(func, dom, epsilon, side, Method::Practical, k_bar, base_params.clone(), base_grids);
    let f = below_form(func, side);
    let lf = base_params.lipschitz;
    let precision = 0.5 * opts.cert_tol;

    let mut t_cells = initial_cells(dom, epsilon, lf, opts);
    let mut d_cells = t_cells.clone();
    let mut k = 1usize;
    let mut found: Option<(usize, ParaboloidSet)> = None;
    while k <= k_bar {
        if report.iterations.len() >= opts.max_iterations {
            report.failure = Some(format!("iteration limit {} reached", opts.max_iterations));
            break;
        }
        let (params, grids) = params_for_counts(func, dom, epsilon, side, &opts.params, &t_cells, &d_cells)?;
        let (outcome, mut log) = attempt(func, dom, k, &params, &grids, opts, true)?;
        report.params = params;
        report.grids = grids;
        let set = match outcome {
            Attempt::Fit(set) => set,
            Attempt::NoFit => {
                let capped = log.status == MilpStatus::SizeLimit;
                report.iterations.push(log);
                if capped {
                    // larger K or finer grids only grow the model
                    report.failure = Some(format!("size caps exceeded at K = {k} before a certified fit"));
                    break;
                }
                k += 1;
                continue;
            }
        };

        let mut c_l = Vec::with_capacity(set.len());
        for p in &set.members {
            let lip = p.slope_bound(dom) + lf;
            let c = if opts.literal_min_check {
                let g = |x: &[f64]| f.value(x) - p.eval(x);
                -certify_max(&g, lip, dom, precision)?.value
            } else {
                let g = |x: &[f64]| p.eval(x) - f.value(x);
                certify_max(&g, lip, dom, precision)?.value
            };
            c_l.push(c);
        }
        let one_sided = c_l.iter().all(|&c| c <= opts.cert_tol);
        let shifted = ParaboloidSet::new(set.members.iter().zip(&c_l).map(|(p, &c)| p.lifted(-c)).collect());
        let g1 = |x: &[f64]| f.value(x) - epsilon - shifted.max_eval(x);
        let miss = certify_max(&g1, shifted.slope_bound(dom) + lf, dom, precision)?.value;
        let covered = miss <= opts.cert_tol;
        log.c_l = c_l;
        log.c_eps = Some(-miss);
        report.iterations.push(log);

        if one_sided && covered {
            found = Some((k, shifted));
            break;
        }
        let (refine_t, refine_d) = if opts.swap_growth {
            (!covered, !one_sided)
        } else {
            (!one_sided, !covered)
        };
        if refine_t {
            t_cells = grow(&t_cells, opts.growth);
        }
        if refine_d {
            d_cells = grow(&d_cells, opts.growth);
        }
    }
    report.wall_time_s = start.elapsed().as_secs_f64();
    match found {
        Some((k, set)) => {
            let mut r = finish(report, func, dom, set, k, opts.cert_tol)?;
            r.wall_time_s = start.elapsed().as_secs_f64();
            Ok(r)
        }
        None => {
            if report.failure.is_none() {
                report.failure = Some(format!("no certified fit with at most {k_bar} paraboloids"));
            }
            Ok(report)
        }
    }
}

/// Runs the chosen search.
pub fn fit(func: &FuncDef, dom: &BoxDomain, epsilon: f64, side: Side, method: Method, opts: &SearchOptions) -> Result<FitReport> {
    match method {
        Method::Exact => binary_search_k(func, dom, epsilon, side, opts),
        Method::Practical => practical_search_k(func, dom, epsilon, side, opts),
    }
}
