//! Best-first branch-and-bound over the dual simplex core.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::model::{check_dense, MilpModel, Sense, VarKind};
use super::simplex::{LpCore, LpStatus};
use crate::error::Result;

pub const FEAS_TOL: f64 = 1e-6;
pub const GAP_ABS: f64 = 1e-8;
const INT_TOL: f64 = 1e-9;
const MAX_ROWS_PER_ROUND: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    SizeLimit,
    TimeLimit,
    NodeLimit,
    /// Stopped at the first solution within the cutoff; optimality not proven.
    Feasible,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveLimits {
    pub time: Option<Duration>,
    pub nodes: Option<u64>,
    pub max_binaries: usize,
    pub max_continuous: usize,
}

impl Default for SolveLimits {
    fn default() -> Self {
        Self {
            time: None,
            nodes: None,
            max_binaries: 1000,
            max_continuous: 200_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub limits: SolveLimits,
    /// Only solutions with objective at most this value are of interest.
    /// When none exists the status is `Infeasible`.
    pub cutoff: Option<f64>,
    /// Load rows flagged lazy only once they are violated.
    pub lazy_rows: bool,
    /// Stop at the first incumbent within the cutoff.
    pub satisfice: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            limits: SolveLimits::default(),
            cutoff: None,
            lazy_rows: true,
            satisfice: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MilpStats {
    pub nodes: u64,
    pub simplex_iterations: u64,
    pub rows_loaded: usize,
    /// Nodes abandoned because an LP hit its iteration cap.
    pub dropped_nodes: u64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpSolution {
    pub status: MilpStatus,
    /// Best assignment found, in declaration order.
    pub values: Option<Vec<f64>>,
    pub objective: Option<f64>,
    /// Best proven lower bound on the optimum.
    pub bound: f64,
    pub stats: MilpStats,
}

impl MilpSolution {
    fn bare(status: MilpStatus) -> Self {
        Self {
            status,
            values: None,
            objective: None,
            bound: f64::NEG_INFINITY,
            stats: MilpStats::default(),
        }
    }

    pub fn value_of(&self, model: &MilpModel, name: &str) -> Option<f64> {
        let j = model.var_index(name)?;
        self.values.as_ref().map(|v| v[j])
    }
}

/// LP with a pool of not-yet-loaded rows.
struct Relaxation<'a> {
    model: &'a MilpModel,
    core: LpCore,
    pool: Vec<usize>,
    root_lower: Vec<f64>,
    root_upper: Vec<f64>,
    max_iter: u64,
}

impl<'a> Relaxation<'a> {
    fn new(model: &'a MilpModel, lazy: bool) -> Self {
        let root_lower: Vec<f64> = model.variables.iter().map(|v| v.lower).collect();
        let root_upper: Vec<f64> = model.variables.iter().map(|v| v.upper).collect();
        let core = LpCore::new(model.objective_dense(), root_lower.clone(), root_upper.clone());
        let mut rel = Relaxation {
            model,
            core,
            pool: Vec::new(),
            root_lower,
            root_upper,
            max_iter: 0,
        };
        let mut eager = Vec::new();
        for (i, c) in model.constraints.iter().enumerate() {
            if lazy && c.lazy {
                rel.pool.push(i);
            } else {
                eager.push(i);
            }
        }
        for i in eager {
            rel.load(i);
        }
        rel
    }

    fn load(&mut self, i: usize) {
        let c = &self.model.constraints[i];
        let (lo, hi) = match c.sense {
            Sense::Le => (f64::NEG_INFINITY, c.rhs),
            Sense::Ge => (c.rhs, f64::INFINITY),
            Sense::Eq => (c.rhs, c.rhs),
        };
        let mut a = 0.0;
        let mut b = 0.0;
        for &(j, coef) in &c.terms {
            let (l, u) = (self.root_lower[j], self.root_upper[j]);
            a += (coef * l).min(coef * u);
            b += (coef * l).max(coef * u);
        }
        self.core.add_row(&c.terms, lo, hi, (a, b));
    }

    fn set_bounds(&mut self, lower: &[f64], upper: &[f64]) {
        for j in 0..lower.len() {
            self.core.set_bounds(j, lower[j], upper[j]);
        }
    }

    /// Adds up to `MAX_ROWS_PER_ROUND` violated pool rows, most violated first.
    fn separate(&mut self) -> usize {
        let x = self.core.structural_values();
        let mut viol: Vec<(f64, usize)> = Vec::new();
        for (p, &i) in self.pool.iter().enumerate() {
            let c = &self.model.constraints[i];
            let s = c.slack(x);
            let scale = c.terms.iter().map(|(_, a)| a.abs()).fold(0.0, f64::max).max(1e-300);
            if s < -1e-9 * (1.0 + c.rhs.abs()) {
                viol.push((-s / scale, p));
            }
        }
        if viol.is_empty() {
            return 0;
        }
        viol.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        viol.truncate(MAX_ROWS_PER_ROUND);
        let mut picked: Vec<usize> = viol.iter().map(|&(_, p)| p).collect();
        picked.sort_unstable();
        for &p in picked.iter().rev() {
            let i = self.pool.swap_remove(p);
            self.load(i);
        }
        picked.len()
    }

    fn solve(&mut self, cutoff: f64, deadline: Option<Instant>) -> LpStatus {
        loop {
            let max_iter = 50 * (self.core.num_rows() + self.model.variables.len()) as u64 + 1000;
            self.max_iter = max_iter;
            let mut st = self.core.solve(cutoff, deadline, max_iter);
            if st == LpStatus::IterLimit {
                self.core.refactor();
                st = self.core.solve(cutoff, deadline, max_iter);
            }
            if st != LpStatus::Optimal {
                return st;
            }
            if self.core.objective() > cutoff {
                return LpStatus::Cutoff;
            }
            if self.separate() == 0 {
                return LpStatus::Optimal;
            }
        }
    }
}

struct Node {
    fixes: Vec<(usize, bool)>,
    bound: f64,
    depth: usize,
    seq: u64,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap pops the greatest: lowest bound, then deepest, then newest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(self.seq.cmp(&other.seq))
    }
}

/// Solves the LP relaxation (binaries relaxed to `[0, 1]`).
pub fn solve_lp_relaxation(model: &MilpModel) -> Result<MilpSolution> {
    model.validate()?;
    let start = Instant::now();
    let mut rel = Relaxation::new(model, true);
    let st = rel.solve(f64::INFINITY, None);
    let mut sol = match st {
        LpStatus::Optimal => {
            let x = rel.core.structural_values().to_vec();
            let obj = model.objective_value(&x);
            MilpSolution {
                status: MilpStatus::Optimal,
                values: Some(x),
                objective: Some(obj),
                bound: obj,
                stats: MilpStats::default(),
            }
        }
        LpStatus::Infeasible => MilpSolution::bare(MilpStatus::Infeasible),
        _ => MilpSolution::bare(MilpStatus::NodeLimit),
    };
    sol.stats.simplex_iterations = rel.core.iterations;
    sol.stats.rows_loaded = rel.core.num_rows();
    sol.stats.wall_time_s = start.elapsed().as_secs_f64();
    Ok(sol)
}

/// Exact branch-and-bound: best-first node selection, branching on the most
/// fractional binary, incumbents polished by re-solving with binaries fixed.
pub fn solve_milp(model: &MilpModel, options: &SolveOptions) -> Result<MilpSolution> {
    model.validate()?;
    let start = Instant::now();
    let limits = &options.limits;
    if model.num_binaries() > limits.max_binaries || model.num_continuous() > limits.max_continuous {
        let mut s = MilpSolution::bare(MilpStatus::SizeLimit);
        s.stats.wall_time_s = start.elapsed().as_secs_f64();
        return Ok(s);
    }
    let deadline = limits.time.map(|t| start + t);
    let binaries: Vec<usize> = model
        .variables
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(j, _)| j)
        .collect();
    let root_lower: Vec<f64> = model.variables.iter().map(|v| v.lower).collect();
    let root_upper: Vec<f64> = model.variables.iter().map(|v| v.upper).collect();
    let cutoff = options.cutoff.unwrap_or(f64::INFINITY);
    let cut_tol = 1e-9 * (1.0 + cutoff.abs().min(1e12));

    let mut rel = Relaxation::new(model, options.lazy_rows);
    let mut heap = BinaryHeap::new();
    heap.push(Node {
        fixes: Vec::new(),
        bound: f64::NEG_INFINITY,
        depth: 0,
        seq: 0,
    });
    let mut seq = 1u64;
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut stats = MilpStats::default();
    let mut status = None;
    let mut lower = root_lower.clone();
    let mut upper = root_upper.clone();

    while let Some(node) = heap.pop() {
        let threshold = match &incumbent {
            Some((obj, _)) => (obj - GAP_ABS).min(cutoff + cut_tol),
            None => cutoff + cut_tol,
        };
        if node.bound > threshold {
            continue;
        }
        if let Some(dl) = deadline {
            if Instant::now() >= dl {
                heap.push(node);
                status = Some(MilpStatus::TimeLimit);
                break;
            }
        }
        if let Some(cap) = limits.nodes {
            if stats.nodes >= cap {
                heap.push(node);
                status = Some(MilpStatus::NodeLimit);
                break;
            }
        }
        stats.nodes += 1;

        lower.copy_from_slice(&root_lower);
        upper.copy_from_slice(&root_upper);
        for &(j, v) in &node.fixes {
            let b = if v { 1.0 } else { 0.0 };
            lower[j] = b;
            upper[j] = b;
        }
        rel.set_bounds(&lower, &upper);
        match rel.solve(threshold, deadline) {
            LpStatus::Optimal => {}
            LpStatus::Infeasible | LpStatus::Cutoff => continue,
            LpStatus::TimeLimit => {
                heap.push(node);
                status = Some(MilpStatus::TimeLimit);
                break;
            }
            LpStatus::IterLimit => {
                stats.dropped_nodes += 1;
                continue;
            }
        }
        let x = rel.core.structural_values().to_vec();
        let obj = model.objective_value(&x);

        let mut branch: Option<(usize, f64)> = None;
        for &j in &binaries {
            let frac = x[j].min(1.0 - x[j]);
            if frac > INT_TOL && branch.map_or(true, |(_, f)| frac > f) {
                branch = Some((j, frac));
            }
        }
        match branch {
            None => {
                if let Some((pobj, px)) = polish(&mut rel, model, &x, &root_lower, &root_upper, deadline) {
                    if pobj <= threshold {
                        incumbent = Some((pobj, px));
                    }
                } else if obj <= threshold && check_dense(model, &x, FEAS_TOL).feasible {
                    incumbent = Some((obj, x));
                }
                if options.satisfice && options.cutoff.is_some() && incumbent.is_some() {
                    status = Some(MilpStatus::Feasible);
                    break;
                }
            }
            Some((j, _)) => {
                let up_first = x[j] >= 0.5;
                for v in [!up_first, up_first] {
                    let mut fixes = node.fixes.clone();
                    fixes.push((j, v));
                    heap.push(Node {
                        fixes,
                        bound: obj,
                        depth: node.depth + 1,
                        seq,
                    });
                    seq += 1;
                }
            }
        }
    }

    stats.simplex_iterations = rel.core.iterations;
    stats.rows_loaded = rel.core.num_rows();
    stats.wall_time_s = start.elapsed().as_secs_f64();
    let open_bound = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    let status = status.unwrap_or(if stats.dropped_nodes > 0 {
        MilpStatus::NodeLimit
    } else if incumbent.is_some() {
        MilpStatus::Optimal
    } else {
        MilpStatus::Infeasible
    });
    let (objective, values) = match incumbent {
        Some((o, v)) => (Some(o), Some(v)),
        None => (None, None),
    };
    let bound = match status {
        MilpStatus::Optimal => objective.unwrap(),
        MilpStatus::Feasible => open_bound.min(objective.unwrap()),
        MilpStatus::Infeasible => f64::INFINITY,
        _ => open_bound.min(objective.unwrap_or(f64::INFINITY)),
    };
    Ok(MilpSolution {
        status,
        values,
        objective,
        bound,
        stats,
    })
}

/// Rounds binaries, fixes them and re-solves for clean continuous values.
fn polish(
    rel: &mut Relaxation<'_>,
    model: &MilpModel,
    x: &[f64],
    root_lower: &[f64],
    root_upper: &[f64],
    deadline: Option<Instant>,
) -> Option<(f64, Vec<f64>)> {
    let mut lower = root_lower.to_vec();
    let mut upper = root_upper.to_vec();
    for (j, v) in model.variables.iter().enumerate() {
        if v.kind == VarKind::Binary {
            let b = x[j].round();
            lower[j] = b;
            upper[j] = b;
        }
    }
    rel.set_bounds(&lower, &upper);
    if rel.solve(f64::INFINITY, deadline) != LpStatus::Optimal {
        return None;
    }
    let mut px = rel.core.structural_values().to_vec();
    for (j, v) in model.variables.iter().enumerate() {
        px[j] = px[j].clamp(v.lower, v.upper);
        if v.kind == VarKind::Binary {
            px[j] = px[j].round();
        }
    }
    if !check_dense(model, &px, FEAS_TOL).feasible {
        return None;
    }
    Some((model.objective_value(&px), px))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn continuous_lp() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 10.0);
        m.add_constraint("c", vec![(x, 1.0)], Sense::Ge, 3.0);
        m.set_objective(vec![(x, 1.0)]);
        let s = solve_milp(&m, &SolveOptions::default()).unwrap();
        assert_eq!(s.status, MilpStatus::Optimal);
        assert!((s.objective.unwrap() - 3.0).abs() < 1e-9);
        assert!((s.values.unwrap()[0] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn binary_tie_broken_by_declaration_order() {
        let mut m = MilpModel::new();
        let x = m.add_binary("x");
        let y = m.add_binary("y");
        m.add_constraint("c", vec![(x, 1.0), (y, 1.0)], Sense::Le, 1.5);
        m.set_objective(vec![(x, -1.0), (y, -1.0)]);
        let s = solve_milp(&m, &SolveOptions::default()).unwrap();
        assert_eq!(s.status, MilpStatus::Optimal);
        assert!((s.objective.unwrap() + 1.0).abs() < 1e-9);
        let v = s.values.unwrap();
        assert_eq!(v[0] + v[1], 1.0);
        assert_eq!(v[0], 1.0);
    }

    #[test]
    fn size_limit_without_solving() {
        let mut m = MilpModel::new();
        for i in 0..1001 {
            m.add_binary(format!("b{i}"));
        }
        let s = solve_milp(&m, &SolveOptions::default()).unwrap();
        assert_eq!(s.status, MilpStatus::SizeLimit);
        assert_eq!(s.stats.nodes, 0);
    }

    #[test]
    fn infeasible_binary_model() {
        let mut m = MilpModel::new();
        let x = m.add_binary("x");
        let y = m.add_binary("y");
        m.add_constraint("a", vec![(x, 1.0), (y, 1.0)], Sense::Eq, 1.0);
        m.add_constraint("b", vec![(x, 1.0), (y, -1.0)], Sense::Eq, 0.0);
        let s = solve_milp(&m, &SolveOptions::default()).unwrap();
        assert_eq!(s.status, MilpStatus::Infeasible);
    }

    #[test]
    fn cutoff_turns_worse_optimum_into_infeasible() {
        let mut m = MilpModel::new();
        let x = m.add_binary("x");
        m.add_constraint("a", vec![(x, 1.0)], Sense::Ge, 0.5);
        m.set_objective(vec![(x, 1.0)]);
        let opts = SolveOptions {
            cutoff: Some(0.5),
            ..Default::default()
        };
        assert_eq!(solve_milp(&m, &opts).unwrap().status, MilpStatus::Infeasible);
    }

    #[test]
    fn lazy_rows_are_respected() {
        let mut m = MilpModel::new();
        let x = m.add_continuous("x", 0.0, 5.0);
        let b = m.add_binary("b");
        m.add_lazy_constraint("l1", vec![(x, 1.0), (b, -2.0)], Sense::Ge, 1.0);
        m.add_lazy_constraint("l2", vec![(x, 1.0)], Sense::Le, 2.5);
        m.set_objective(vec![(x, 1.0), (b, -1.0)]);
        let s = solve_milp(&m, &SolveOptions::default()).unwrap();
        // b=1 needs x >= 3 > 2.5, so b=0, x=1
        assert_eq!(s.status, MilpStatus::Optimal);
        let v = s.values.unwrap();
        assert_eq!(v[1], 0.0);
        assert!((v[0] - 1.0).abs() < 1e-9);
    }
}
