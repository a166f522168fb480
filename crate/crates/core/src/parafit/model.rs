use std::collections::HashMap;

use super::grid::GridSpec;
use super::params::{below_form, FitParams};
use crate::error::{Error, Result};
use crate::funcspace::{Approximable, BoxDomain, FuncDef};
use crate::milp::{solve_milp, MilpModel, MilpStatus, Sense, SolveOptions, VarKind};
use crate::paraboloid::{Paraboloid, ParaboloidSet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelOptions {
    /// Omit the neighbourhood slope rows.
    pub drop_slope_neighbors: bool,
    /// Order the paraboloids by `γ`.
    pub symmetry_break: bool,
    pub max_binaries: usize,
    pub max_continuous: usize,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            drop_slope_neighbors: false,
            symmetry_break: true,
            max_binaries: 1000,
            max_continuous: 200_000,
        }
    }
}

/// The fit MILP with its variable layout.
///
/// Per paraboloid `l` the block `a_l_i, b_l_i, g_l` comes first; then
/// `s_t_l` for every coarse point `t`, then `v_c_l` for every cell `c`.
#[derive(Debug, Clone)]
pub struct FitModel {
    pub model: MilpModel,
    pub k: usize,
    pub dim: usize,
    pub n_eps: usize,
    pub n_cells: usize,
}

impl FitModel {
    pub fn alpha(&self, l: usize, i: usize) -> usize {
        l * (2 * self.dim + 1) + i
    }

    pub fn beta(&self, l: usize, i: usize) -> usize {
        l * (2 * self.dim + 1) + self.dim + i
    }

    pub fn gamma(&self, l: usize) -> usize {
        l * (2 * self.dim + 1) + 2 * self.dim
    }

    pub fn select(&self, t: usize, l: usize) -> usize {
        self.k * (2 * self.dim + 1) + t * self.k + l
    }

    pub fn violation(&self, c: usize, l: usize) -> usize {
        self.k * (2 * self.dim + 1) + self.n_eps * self.k + c * self.k + l
    }

    /// Paraboloids read off a solution vector.
    pub fn extract(&self, x: &[f64]) -> ParaboloidSet {
        let members = (0..self.k)
            .map(|l| Paraboloid {
                alpha: (0..self.dim).map(|i| x[self.alpha(l, i)]).collect(),
                beta: (0..self.dim).map(|i| x[self.beta(l, i)]).collect(),
                gamma: x[self.gamma(l)],
            })
            .collect();
        ParaboloidSet::new(members)
    }

    /// Dense assignment for given paraboloids and selection; every `v` is set
    /// to the least value its row allows.
    pub fn assignment(&self, set: &ParaboloidSet, selected: &[usize], grids: &GridSpec, f: &FuncDef, params: &FitParams) -> Result<Vec<f64>> {
        if set.len() != self.k || selected.len() != self.n_eps {
            return Err(Error::Input("assignment does not match the model layout".into()));
        }
        let mut x = vec![0.0; self.model.variables.len()];
        for (l, p) in set.members.iter().enumerate() {
            for i in 0..self.dim {
                x[self.alpha(l, i)] = p.alpha[i];
                x[self.beta(l, i)] = p.beta[i];
            }
            x[self.gamma(l)] = p.gamma;
        }
        for (t, &l) in selected.iter().enumerate() {
            x[self.select(t, l)] = 1.0;
        }
        for (c, &d) in grids.cells.iter().enumerate() {
            let lo = &grids.int_points[d];
            let hi = grids.cell_upper(d);
            let cell = BoxDomain::new(lo.clone(), hi.clone())?;
            let vol = cell.volume();
            let mu = f.integral_measure(&cell)?;
            for (l, p) in set.members.iter().enumerate() {
                let need = p.integral(lo, &hi) - mu + params.nu * params.epsilon * vol;
                x[self.violation(c, l)] = need.max(0.0);
            }
        }
        Ok(x)
    }

    /// Among points sharing the binaries of `x` and an objective within
    /// `zero_tol`, one maximizing `Σ_l ∫ p^l` over `dom`.
    pub fn lifted(&self, x: &[f64], dom: &BoxDomain, zero_tol: f64) -> Result<Option<Vec<f64>>> {
        let mut m = self.model.clone();
        for v in m.variables.iter_mut().filter(|v| v.kind == VarKind::Binary) {
            let j = self.model.var_index(&v.name).unwrap_or_default();
            let b = x[j].round();
            v.lower = b;
            v.upper = b;
        }
        let budget: Vec<(usize, f64)> = m.objective.clone();
        m.add_constraint("budget", budget, Sense::Le, zero_tol);
        let (sq, lin, vol) = cell_moments(dom.lower(), dom.upper());
        let mut obj = Vec::with_capacity(self.k * (2 * self.dim + 1));
        for l in 0..self.k {
            for i in 0..self.dim {
                obj.push((self.alpha(l, i), -sq[i]));
                obj.push((self.beta(l, i), -lin[i]));
            }
            obj.push((self.gamma(l), -vol));
        }
        m.set_objective(obj);
        let sol = solve_milp(&m, &SolveOptions::default())?;
        Ok(match (sol.status, sol.values) {
            (MilpStatus::Optimal, Some(y)) => Some(y),
            _ => None,
        })
    }

    /// Name-keyed version of [`FitModel::assignment`].
    pub fn named(&self, x: &[f64]) -> HashMap<String, f64> {
        self.model
            .variables
            .iter()
            .zip(x)
            .map(|(v, val)| (v.name.clone(), *val))
            .collect()
    }
}

/// `(∫ x², ∫ x, vol)` coefficients of a cell, per axis for the quadratic and linear terms.
fn cell_moments(lo: &[f64], hi: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
    let vol: f64 = lo.iter().zip(hi).map(|(l, u)| u - l).product();
    let sq = lo.iter().zip(hi).map(|(l, u)| vol * (u * u + u * l + l * l) / 3.0).collect();
    let lin = lo.iter().zip(hi).map(|(l, u)| vol * (u + l) / 2.0).collect();
    (sq, lin, vol)
}

/// Builds the fit MILP for `K` paraboloids.
pub fn build_fit_model(
    func: &FuncDef,
    dom: &BoxDomain,
    k: usize,
    params: &FitParams,
    grids: &GridSpec,
    opts: &ModelOptions,
) -> Result<FitModel> {
    if k == 0 {
        return Err(Error::Input("the number of paraboloids must be positive".into()));
    }
    let n = dom.dim();
    if grids.dt.len() != n {
        return Err(Error::Input("grid dimension differs from the domain".into()));
    }
    let n_eps = grids.eps_points.len();
    let n_cells = grids.cells.len();
    let binaries = n_eps * k;
    let continuous = k * (2 * n + 1) + n_cells * k;
    if binaries > opts.max_binaries || continuous > opts.max_continuous {
        return Err(Error::Size {
            binaries,
            continuous,
            max_binaries: opts.max_binaries,
            max_continuous: opts.max_continuous,
        });
    }
    let f = below_form(func, params.side);
    let fm = FitModel {
        model: MilpModel::new(),
        k,
        dim: n,
        n_eps,
        n_cells,
    };
    let mut m = MilpModel::new();
    for l in 0..k {
        for i in 0..n {
            let (lo, hi) = params.alpha_bounds(i);
            m.add_continuous(format!("a_{l}_{i}"), lo, hi);
        }
        for i in 0..n {
            m.add_continuous(format!("b_{l}_{i}"), -params.beta_max[i], params.beta_max[i]);
        }
        m.add_continuous(format!("g_{l}"), params.gamma_min, params.gamma_max);
    }
    for t in 0..n_eps {
        for l in 0..k {
            m.add_var(format!("s_{t}_{l}"), VarKind::Binary, 0.0, 1.0);
        }
    }
    let mut cell_data = Vec::with_capacity(n_cells);
    for &d in &grids.cells {
        let lo = grids.int_points[d].clone();
        let hi = grids.cell_upper(d);
        let mu = f.integral_measure(&BoxDomain::new(lo.clone(), hi.clone())?)?;
        let (sq, lin, vol) = cell_moments(&lo, &hi);
        cell_data.push((sq, lin, vol, mu));
    }
    for (c, (_, _, vol, _)) in cell_data.iter().enumerate() {
        for l in 0..k {
            m.add_continuous(format!("v_{c}_{l}"), 0.0, vol * params.v_density);
        }
    }

    let eval_terms = |l: usize, x: &[f64]| -> Vec<(usize, f64)> {
        let mut terms = Vec::with_capacity(2 * n + 1);
        for i in 0..n {
            terms.push((fm.alpha(l, i), x[i] * x[i]));
        }
        for i in 0..n {
            terms.push((fm.beta(l, i), x[i]));
        }
        terms.push((fm.gamma(l), 1.0));
        terms
    };

    // coverage on the coarse grid
    for (t, pt) in grids.eps_points.iter().enumerate() {
        let ft = f.value(pt);
        for l in 0..k {
            let mut terms = eval_terms(l, pt);
            terms.push((fm.select(t, l), -params.m1));
            m.add_constraint(format!("cover_{t}_{l}"), terms, Sense::Ge, ft - params.delta - params.m1);
        }
        let terms = (0..k).map(|l| (fm.select(t, l), 1.0)).collect();
        m.add_constraint(format!("pick_{t}"), terms, Sense::Ge, 1.0);
    }
    if !opts.drop_slope_neighbors {
        let rhs = 2.0 * params.lipschitz + params.m2;
        for t in 0..n_eps {
            for l in 0..k {
                for &u in &grids.neighbors[t] {
                    let nb = &grids.eps_points[u];
                    for i in 0..n {
                        for (sgn, tag) in [(1.0, "p"), (-1.0, "m")] {
                            m.add_lazy_constraint(
                                format!("nslope_{t}_{l}_{u}_{i}_{tag}"),
                                vec![
                                    (fm.alpha(l, i), sgn * 2.0 * nb[i]),
                                    (fm.beta(l, i), sgn),
                                    (fm.select(t, l), params.m2),
                                ],
                                Sense::Le,
                                rhs,
                            );
                        }
                    }
                }
            }
        }
    }
    // one-sidedness on the fine grid
    for (d, pt) in grids.int_points.iter().enumerate() {
        let rhs = f.value(pt) - params.nu * params.epsilon;
        for l in 0..k {
            m.add_lazy_constraint(format!("under_{d}_{l}"), eval_terms(l, pt), Sense::Le, rhs);
        }
    }
    for (c, (sq, lin, vol, mu)) in cell_data.iter().enumerate() {
        for l in 0..k {
            let mut terms = vec![(fm.violation(c, l), 1.0)];
            for i in 0..n {
                terms.push((fm.alpha(l, i), -sq[i]));
            }
            for i in 0..n {
                terms.push((fm.beta(l, i), -lin[i]));
            }
            terms.push((fm.gamma(l), -vol));
            m.add_lazy_constraint(format!("area_{c}_{l}"), terms, Sense::Ge, -mu + params.nu * params.epsilon * vol);
        }
    }
    // endpoint slopes
    for l in 0..k {
        for i in 0..n {
            for (x, end) in [(dom.lower()[i], "lo"), (dom.upper()[i], "hi")] {
                for (sgn, tag) in [(1.0, "p"), (-1.0, "m")] {
                    m.add_constraint(
                        format!("slope_{l}_{i}_{end}_{tag}"),
                        vec![(fm.alpha(l, i), sgn * 2.0 * x), (fm.beta(l, i), sgn)],
                        Sense::Le,
                        params.slope_cap,
                    );
                }
            }
        }
    }
    if opts.symmetry_break {
        for l in 0..k.saturating_sub(1) {
            m.add_constraint(
                format!("order_{l}"),
                vec![(fm.gamma(l), 1.0), (fm.gamma(l + 1), -1.0)],
                Sense::Le,
                0.0,
            );
        }
    }
    let objective = (0..n_cells)
        .flat_map(|c| (0..k).map(move |l| (c, l)))
        .map(|(c, l)| (fm.violation(c, l), 1.0))
        .collect();
    m.set_objective(objective);
    Ok(FitModel { model: m, ..fm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::FuncId;
    use crate::paraboloid::Side;
    use crate::parafit::params::{params_for_counts, ParamOptions};

    fn unit_setup(k: usize, opts: ModelOptions) -> FitModel {
        let sin = FuncDef::registered(FuncId::Sin).unwrap();
        let dom = BoxDomain::interval(0.0, 1.0).unwrap();
        let (p, g) = params_for_counts(&sin, &dom, 1.0, Side::Below, &ParamOptions::default(), &[2], &[4]).unwrap();
        build_fit_model(&sin, &dom, k, &p, &g, &opts).unwrap()
    }

    #[test]
    fn counts_on_unit_interval() {
        let fm = unit_setup(2, ModelOptions::default());
        let m = &fm.model;
        assert_eq!(m.num_binaries(), 6);
        let v = m.variables.iter().filter(|v| v.name.starts_with("v_")).count();
        assert_eq!(v, 8);
        let count = |p: &str| m.constraints.iter().filter(|c| c.name.starts_with(p)).count();
        // coarse points 0, 0.5, 1 have 1, 2, 1 neighbours
        assert_eq!(count("cover_"), 6);
        assert_eq!(count("pick_"), 3);
        assert_eq!(count("nslope_"), 4 * 2 * 2);
        assert_eq!(count("under_"), 5 * 2);
        assert_eq!(count("area_"), 4 * 2);
        assert_eq!(count("slope_"), 4 * 2);
        assert_eq!(count("order_"), 1);
        assert_eq!(m.constraints.len(), 6 + 3 + 16 + 10 + 8 + 8 + 1);

        let relaxed = unit_setup(2, ModelOptions {
            drop_slope_neighbors: true,
            symmetry_break: false,
            ..ModelOptions::default()
        });
        assert_eq!(relaxed.model.constraints.len(), 6 + 3 + 10 + 8 + 8);
    }

    #[test]
    fn area_row_coefficients() {
        // p(x) = x on [0, 0.25] with f ≡ 0 and νε = 0.25 gives ∫(x + 0.25) = 0.09375
        let (sq, lin, vol) = cell_moments(&[0.0], &[0.25]);
        let rhs_free = 0.0 * sq[0] + 1.0 * lin[0] + 0.0 * vol + 0.25 * vol;
        assert!((rhs_free - 0.09375).abs() < 1e-15);
    }

    #[test]
    fn layout_names_match_indices() {
        let fm = unit_setup(3, ModelOptions::default());
        let vars = &fm.model.variables;
        assert_eq!(vars[fm.alpha(2, 0)].name, "a_2_0");
        assert_eq!(vars[fm.beta(1, 0)].name, "b_1_0");
        assert_eq!(vars[fm.gamma(0)].name, "g_0");
        assert_eq!(vars[fm.select(2, 1)].name, "s_2_1");
        assert_eq!(vars[fm.violation(3, 2)].name, "v_3_2");
    }

    #[test]
    fn size_cap_reports_counts() {
        let sin = FuncDef::registered(FuncId::Sin).unwrap();
        let dom = BoxDomain::interval(0.0, 1.0).unwrap();
        let (p, g) = params_for_counts(&sin, &dom, 1.0, Side::Below, &ParamOptions::default(), &[100], &[4]).unwrap();
        let opts = ModelOptions::default();
        match build_fit_model(&sin, &dom, 10, &p, &g, &opts) {
            Err(Error::Size { binaries, .. }) => assert_eq!(binaries, 1010),
            other => panic!("expected a size error, got {other:?}"),
        }
    }
}
