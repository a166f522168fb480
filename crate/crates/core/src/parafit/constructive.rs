use super::grid::GridSpec;
use super::params::{below_form, FitParams};
use crate::error::{Error, Result};
use crate::funcspace::{Approximable, FuncDef};
use crate::paraboloid::{Paraboloid, ParaboloidSet};

/// One paraboloid per coarse point `t` with `αᵢ = −L/Δ`, `βᵢ = 2Ltᵢ/Δ` and
/// `p(t) = f(t) − δ`, each selected at its own point.
///
/// The set is returned sorted by `γ` so that it also satisfies the ordering
/// rows; the second value maps every coarse point to its paraboloid.
pub fn constructive_solution(func: &FuncDef, params: &FitParams, grids: &GridSpec) -> Result<(ParaboloidSet, Vec<usize>)> {
    let width = params
        .unified
        .ok_or_else(|| Error::Precondition("the construction needs a unified grid width".into()))?;
    let f = below_form(func, params.side);
    let l = params.lipschitz;
    let mut members: Vec<(usize, Paraboloid)> = grids
        .eps_points
        .iter()
        .enumerate()
        .map(|(t, pt)| {
            let alpha = vec![-l / width; pt.len()];
            let beta: Vec<f64> = pt.iter().map(|ti| 2.0 * l * ti / width).collect();
            let q: f64 = pt.iter().map(|ti| l * ti * ti / width).sum();
            let gamma = f.value(pt) - params.delta - q;
            (t, Paraboloid { alpha, beta, gamma })
        })
        .collect();
    members.sort_by(|a, b| a.1.gamma.total_cmp(&b.1.gamma).then(a.0.cmp(&b.0)));
    let mut selected = vec![0; members.len()];
    for (rank, (t, _)) in members.iter().enumerate() {
        selected[*t] = rank;
    }
    let set = ParaboloidSet::new(members.into_iter().map(|(_, p)| p).collect());
    Ok((set, selected))
}
