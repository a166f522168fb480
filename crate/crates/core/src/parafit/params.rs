use serde::{Deserialize, Serialize};

use super::grid::{rounded_cells, GridSpec};
use crate::error::{Error, Result};
use crate::funcspace::{Approximable, BoxDomain, FuncDef};
use crate::paraboloid::Side;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamOptions {
    /// `δ = delta_frac·ε`
    pub delta_frac: f64,
    /// `ν = nu_frac·δ/ε`
    pub nu_frac: f64,
    /// `C = κ·L`
    pub kappa: f64,
    /// Restrict every `αᵢ` of the below form to `≤ 0`.
    #[serde(default)]
    pub nonpositive_quadratic: bool,
}

impl Default for ParamOptions {
    fn default() -> Self {
        Self {
            delta_frac: 0.5,
            nu_frac: 0.5,
            kappa: 10.0,
            nonpositive_quadratic: false,
        }
    }
}

/// Scalars of the fit model together with the coefficient boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParams {
    pub epsilon: f64,
    pub delta: f64,
    pub nu: f64,
    /// Slope cap `C`.
    pub slope_cap: f64,
    pub m1: f64,
    pub m2: f64,
    pub side: Side,
    pub lipschitz: f64,
    /// Common grid width in theorem mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unified: Option<f64>,
    pub alpha_max: Vec<f64>,
    pub beta_max: Vec<f64>,
    pub gamma_min: f64,
    pub gamma_max: f64,
    /// Upper bound on `v` per unit cell volume.
    pub v_density: f64,
    #[serde(default)]
    pub nonpositive_quadratic: bool,
}

impl FitParams {
    /// Bounds of `αᵢ` in the model.
    pub fn alpha_bounds(&self, i: usize) -> (f64, f64) {
        let hi = if self.nonpositive_quadratic { 0.0 } else { self.alpha_max[i] };
        (-self.alpha_max[i], hi)
    }
}

/// The function actually fitted from below: `f` itself or `−f` for the above side.
pub fn below_form(func: &FuncDef, side: Side) -> FuncDef {
    match side {
        Side::Below => func.clone(),
        Side::Above => func.negated(),
    }
}

fn check_inputs(epsilon: f64, opts: &ParamOptions) -> Result<()> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::Input(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(opts.delta_frac > 0.0 && opts.delta_frac < 1.0) {
        return Err(Error::Input(format!("delta fraction must lie in (0,1), got {}", opts.delta_frac)));
    }
    if !(opts.nu_frac > 0.0 && opts.nu_frac < 1.0) {
        return Err(Error::Input(format!("nu fraction must lie in (0,1), got {}", opts.nu_frac)));
    }
    if !(opts.kappa >= 1.0) {
        return Err(Error::Input(format!("kappa must be at least 1, got {}", opts.kappa)));
    }
    Ok(())
}

/// Width satisfying the coverage condition on `G_ε`.
pub fn raw_dt(n: usize, epsilon: f64, delta: f64, lipschitz: f64) -> f64 {
    let n = n as f64;
    (n + 1.0) / (n * n) * (epsilon - delta) / (3.0 * lipschitz)
}

/// Width satisfying the one-sidedness condition on `G`.
pub fn raw_dd(n: usize, epsilon: f64, nu: f64, slope_cap: f64, lipschitz: f64) -> f64 {
    2.0 * nu * epsilon / ((3f64.sqrt() - 1.0) * n as f64 * (slope_cap + lipschitz))
}

fn cells_for(dom: &BoxDomain, raw: f64) -> Result<Vec<usize>> {
    (0..dom.dim()).map(|i| rounded_cells(dom.width(i), raw)).collect()
}

/// Range information about `f` used for the coefficient boxes.
struct Range {
    min_dom: f64,
    max_abs: f64,
    max_int: f64,
    max_eps: f64,
}

fn sample_range(f: &FuncDef, lipschitz: f64, grids: &GridSpec) -> Result<Range> {
    let mut min_int = f64::INFINITY;
    let mut max_int = f64::NEG_INFINITY;
    for p in &grids.int_points {
        let v = f.value(p);
        min_int = min_int.min(v);
        max_int = max_int.max(v);
    }
    let mut max_eps = f64::NEG_INFINITY;
    for p in &grids.eps_points {
        max_eps = max_eps.max(f.value(p));
    }
    // every point lies within half a cell (in 1-norm) of the fine grid
    let slack = lipschitz * grids.dd.iter().sum::<f64>() / 2.0;
    let min_dom = min_int - slack;
    let max_abs = min_dom.abs().max((max_int + slack).abs());
    Ok(Range {
        min_dom,
        max_abs,
        max_int,
        max_eps,
    })
}

fn boxed_params(
    f: &FuncDef,
    dom: &BoxDomain,
    epsilon: f64,
    delta: f64,
    nu: f64,
    slope_cap: f64,
    lipschitz: f64,
    side: Side,
    grids: &GridSpec,
) -> Result<FitParams> {
    let n = dom.dim();
    let mut alpha_max = Vec::with_capacity(n);
    let mut beta_max = Vec::with_capacity(n);
    let mut s = 0.0;
    for i in 0..n {
        let (a, b) = (dom.lower()[i], dom.upper()[i]);
        let am = slope_cap / (b - a);
        let bm = slope_cap * (1.0 + 2.0 * a.abs().max(b.abs()) / (b - a));
        s += am * a.abs().max(b.abs()).powi(2) + bm * a.abs().max(b.abs());
        alpha_max.push(am);
        beta_max.push(bm);
    }
    let r = sample_range(f, lipschitz, grids)?;
    let gamma_min = r.min_dom - epsilon - s;
    let gamma_max = r.max_int - nu * epsilon + s;
    let m1 = (r.max_eps - delta) - (gamma_min - s);
    let gamma_abs = gamma_min.abs().max(gamma_max.abs());
    Ok(FitParams {
        epsilon,
        delta,
        nu,
        slope_cap,
        m1,
        m2: slope_cap,
        side,
        lipschitz,
        unified: None,
        alpha_max,
        beta_max,
        gamma_min,
        gamma_max,
        v_density: s + gamma_abs + r.max_abs + nu * epsilon,
        nonpositive_quadratic: false,
    })
}

/// Default parameters, grids from the width formulas and `K̄ = |G_ε|`.
pub fn derive_params(
    func: &FuncDef,
    dom: &BoxDomain,
    epsilon: f64,
    side: Side,
    opts: &ParamOptions,
) -> Result<(FitParams, GridSpec, usize)> {
    check_inputs(epsilon, opts)?;
    let f = below_form(func, side);
    f.check_domain(dom)?;
    let lipschitz = f.lipschitz_bound(dom)?;
    let n = dom.dim();
    let delta = opts.delta_frac * epsilon;
    let nu = opts.nu_frac * delta / epsilon;
    let slope_cap = opts.kappa * lipschitz;
    let (t_cells, d_cells) = if lipschitz == 0.0 {
        (vec![1; n], vec![1; n])
    } else {
        (
            cells_for(dom, raw_dt(n, epsilon, delta, lipschitz))?,
            cells_for(dom, raw_dd(n, epsilon, nu, slope_cap, lipschitz))?,
        )
    };
    let grids = GridSpec::from_counts(dom, &t_cells, &d_cells);
    let mut params = boxed_params(&f, dom, epsilon, delta, nu, slope_cap, lipschitz, side, &grids)?;
    params.nonpositive_quadratic = opts.nonpositive_quadratic;
    let kbar = grids.eps_points.len();
    Ok((params, grids, kbar))
}

/// Parameters and grids for per-axis cell counts, used by the adaptive search.
pub fn params_for_counts(
    func: &FuncDef,
    dom: &BoxDomain,
    epsilon: f64,
    side: Side,
    opts: &ParamOptions,
    t_cells: &[usize],
    d_cells: &[usize],
) -> Result<(FitParams, GridSpec)> {
    check_inputs(epsilon, opts)?;
    let f = below_form(func, side);
    f.check_domain(dom)?;
    let lipschitz = f.lipschitz_bound(dom)?;
    let delta = opts.delta_frac * epsilon;
    let nu = opts.nu_frac * delta / epsilon;
    let grids = GridSpec::from_counts(dom, t_cells, d_cells);
    let mut params = boxed_params(&f, dom, epsilon, delta, nu, opts.kappa * lipschitz, lipschitz, side, &grids)?;
    params.nonpositive_quadratic = opts.nonpositive_quadratic;
    Ok((params, grids))
}

/// Outcome of the unified-width parameter choice.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremMode {
    pub params: FitParams,
    #[serde(skip)]
    pub grids: GridSpec,
    pub delta_width: f64,
    /// Whether `Δ` also satisfies the one-sidedness width bound for `C = 2L‖b−a‖∞/Δ`.
    pub dd_condition_holds: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

/// Unified width `Δ = min(coverage width, 2δ/(nL))` rounded to a divisor of
/// every edge, with `C = 2L‖b−a‖∞/Δ` and `ν = δ/(2ε)`.
pub fn theorem_params(func: &FuncDef, dom: &BoxDomain, epsilon: f64, side: Side, delta_frac: f64) -> Result<TheoremMode> {
    let opts = ParamOptions {
        delta_frac,
        ..ParamOptions::default()
    };
    check_inputs(epsilon, &opts)?;
    let f = below_form(func, side);
    f.check_domain(dom)?;
    let lipschitz = f.lipschitz_bound(dom)?;
    if lipschitz == 0.0 {
        return Err(Error::Input("unified width needs a positive Lipschitz constant".into()));
    }
    let n = dom.dim();
    let delta = delta_frac * epsilon;
    let nu = delta / (2.0 * epsilon);
    let raw = raw_dt(n, epsilon, delta, lipschitz).min(2.0 * delta / (n as f64 * lipschitz));
    let wmax = dom.max_width();
    // one width for every axis: it must divide each edge
    let cells_long = rounded_cells(wmax, raw)?;
    let width = wmax / cells_long as f64;
    let cells = (0..n)
        .map(|i| {
            let c = dom.width(i) / width;
            if (c - c.round()).abs() > 1e-9 * c.max(1.0) {
                Err(Error::Input(format!(
                    "edge {} is not a multiple of the unified width {width}",
                    dom.width(i)
                )))
            } else {
                Ok(c.round() as usize)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let slope_cap = 2.0 * lipschitz * wmax / width;
    let grids = GridSpec::from_counts(dom, &cells, &cells);
    let mut params = boxed_params(&f, dom, epsilon, delta, nu, slope_cap, lipschitz, side, &grids)?;
    params.unified = Some(width);
    let holds = width <= raw_dd(n, epsilon, nu, slope_cap, lipschitz) * (1.0 + 1e-12);
    let diagnostic = (!holds).then(|| {
        format!(
            "unified width {width:.6} exceeds the one-sidedness width {:.6} implied by C = {slope_cap:.6}; \
             no width satisfies it because 2L||b-a|| = {:.6} > 2 nu eps/((sqrt3-1) n) = {:.6}",
            raw_dd(n, epsilon, nu, slope_cap, lipschitz),
            2.0 * lipschitz * wmax,
            2.0 * nu * epsilon / ((3f64.sqrt() - 1.0) * n as f64)
        )
    });
    Ok(TheoremMode {
        params,
        grids,
        delta_width: width,
        dd_condition_holds: holds,
        diagnostic,
    })
}
