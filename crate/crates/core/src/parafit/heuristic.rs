//! Greedy primal heuristic for univariate fit models: cover maximal runs of
//! consecutive coarse points with one paraboloid each.

use super::grid::GridSpec;
use super::model::FitModel;
use super::params::{below_form, FitParams};
use crate::error::Result;
use crate::funcspace::{Approximable, BoxDomain, FuncDef};
use crate::milp::{check_dense, solve_milp, MilpModel, MilpStatus, Sense, SolveOptions, FEAS_TOL};
use crate::paraboloid::{Paraboloid, ParaboloidSet};

/// Rows shared by every run: one-sidedness on the fine grid, zero integral
/// excess on every cell and the endpoint slope caps.
struct RunLp<'a> {
    base: MilpModel,
    f: FuncDef,
    params: &'a FitParams,
    grids: &'a GridSpec,
    with_neighbors: bool,
}

impl<'a> RunLp<'a> {
    fn new(func: &FuncDef, dom: &BoxDomain, params: &'a FitParams, grids: &'a GridSpec, with_neighbors: bool) -> Result<Self> {
        let f = below_form(func, params.side);
        let mut m = MilpModel::new();
        let (lo, hi) = params.alpha_bounds(0);
        let a = m.add_continuous("a", lo, hi);
        let b = m.add_continuous("b", -params.beta_max[0], params.beta_max[0]);
        let g = m.add_continuous("g", params.gamma_min, params.gamma_max);
        let ne = params.nu * params.epsilon;
        for (d, pt) in grids.int_points.iter().enumerate() {
            let x = pt[0];
            m.add_lazy_constraint(format!("under_{d}"), vec![(a, x * x), (b, x), (g, 1.0)], Sense::Le, f.value(pt) - ne);
        }
        for (c, &d) in grids.cells.iter().enumerate() {
            let (l, u) = (grids.int_points[d][0], grids.cell_upper(d)[0]);
            let vol = u - l;
            let mu = f.integral_measure(&BoxDomain::interval(l, u)?)?;
            m.add_lazy_constraint(
                format!("area_{c}"),
                vec![(a, vol * (u * u + u * l + l * l) / 3.0), (b, vol * (u + l) / 2.0), (g, vol)],
                Sense::Le,
                mu - ne * vol,
            );
        }
        for x in [dom.lower()[0], dom.upper()[0]] {
            m.add_constraint("slope_p", vec![(a, 2.0 * x), (b, 1.0)], Sense::Le, params.slope_cap);
            m.add_constraint("slope_m", vec![(a, -2.0 * x), (b, -1.0)], Sense::Le, params.slope_cap);
        }
        Ok(Self {
            base: m,
            f,
            params,
            grids,
            with_neighbors,
        })
    }

    /// A paraboloid selected at coarse points `from..=to`, if one exists.
    fn solve(&self, from: usize, to: usize) -> Result<Option<Paraboloid>> {
        let mut m = self.base.clone();
        for t in from..=to {
            let pt = &self.grids.eps_points[t];
            let x = pt[0];
            m.add_constraint(
                format!("cover_{t}"),
                vec![(0, x * x), (1, x), (2, 1.0)],
                Sense::Ge,
                self.f.value(pt) - self.params.delta,
            );
            if self.with_neighbors {
                let cap = 2.0 * self.params.lipschitz;
                for &u in &self.grids.neighbors[t] {
                    let y = self.grids.eps_points[u][0];
                    m.add_constraint(format!("nslope_{t}_{u}_p"), vec![(0, 2.0 * y), (1, 1.0)], Sense::Le, cap);
                    m.add_constraint(format!("nslope_{t}_{u}_m"), vec![(0, -2.0 * y), (1, -1.0)], Sense::Le, cap);
                }
            }
        }
        let sol = solve_milp(&m, &SolveOptions::default())?;
        Ok(match (sol.status, sol.values) {
            (MilpStatus::Optimal, Some(x)) => Some(Paraboloid::univariate(x[0], x[1], x[2])),
            _ => None,
        })
    }
}

/// Greedy cover of the coarse grid by runs; stops once more than `limit`
/// paraboloids would be needed. Returns the paraboloids and the run start of
/// every paraboloid.
fn greedy_runs(lp: &RunLp, n_eps: usize, limit: usize) -> Result<Option<Vec<(usize, Paraboloid)>>> {
    let mut runs = Vec::new();
    let mut from = 0;
    while from < n_eps {
        if runs.len() == limit {
            return Ok(None);
        }
        let Some(first) = lp.solve(from, from)? else {
            return Ok(None);
        };
        // galloping then bisection on the last covered point
        let mut good = (from, first);
        let mut step = 1;
        let mut bad = None;
        while bad.is_none() {
            let to = (good.0 + step).min(n_eps - 1);
            if to == good.0 {
                break;
            }
            match lp.solve(from, to)? {
                Some(p) => good = (to, p),
                None => bad = Some(to),
            }
            step *= 2;
        }
        if let Some(mut hi) = bad {
            while hi - good.0 > 1 {
                let mid = (good.0 + hi) / 2;
                match lp.solve(from, mid)? {
                    Some(p) => good = (mid, p),
                    None => hi = mid,
                }
            }
        }
        runs.push((from, good.1));
        from = good.0 + 1;
    }
    Ok(Some(runs))
}

/// A zero-objective point of `fm`, as a dense vector, built from greedy runs, or `None` when the
/// runs need more than `fm.k` paraboloids or the point fails the model check.
pub(crate) fn greedy_fit(
    func: &FuncDef,
    dom: &BoxDomain,
    fm: &FitModel,
    params: &FitParams,
    grids: &GridSpec,
    with_neighbors: bool,
    zero_tol: f64,
) -> Result<Option<Vec<f64>>> {
    if dom.dim() != 1 {
        return Ok(None);
    }
    let lp = RunLp::new(func, dom, params, grids, with_neighbors)?;
    let Some(runs) = greedy_runs(&lp, fm.n_eps, fm.k)? else {
        return Ok(None);
    };
    let mut owner = vec![0; fm.n_eps];
    for (r, (start, _)) in runs.iter().enumerate() {
        for o in owner.iter_mut().skip(*start) {
            *o = r;
        }
    }
    let n_runs = runs.len();
    let mut members: Vec<(usize, Paraboloid)> = runs.into_iter().map(|(_, p)| p).enumerate().collect();
    let last = members[n_runs - 1].1.clone();
    while members.len() < fm.k {
        members.push((usize::MAX, last.clone()));
    }
    members.sort_by(|a, b| a.1.gamma.total_cmp(&b.1.gamma));
    let mut rank = vec![0; n_runs];
    for (pos, (r, _)) in members.iter().enumerate() {
        if *r != usize::MAX {
            rank[*r] = pos;
        }
    }
    let selected: Vec<usize> = owner.iter().map(|&r| rank[r]).collect();
    let set = ParaboloidSet::new(members.into_iter().map(|(_, p)| p).collect());
    let f = below_form(func, params.side);
    let x = fm.assignment(&set, &selected, grids, &f, params)?;
    let report = check_dense(&fm.model, &x, FEAS_TOL);
    if report.feasible && fm.model.objective_value(&x) <= zero_tol {
        Ok(Some(x))
    } else {
        Ok(None)
    }
}
