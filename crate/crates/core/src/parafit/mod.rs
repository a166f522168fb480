//! Fitting paraboloid sets: the fit MILP, its parameters and grids, and the
//! two searches over the number of paraboloids.

mod constructive;
mod grid;
mod heuristic;
mod model;
mod params;
mod search;

pub use constructive::constructive_solution;
pub use grid::GridSpec;
pub use model::{build_fit_model, FitModel, ModelOptions};
pub use params::{
    below_form, derive_params, params_for_counts, raw_dd, raw_dt, theorem_params, FitParams, ParamOptions, TheoremMode,
};
pub use search::{
    binary_search_k, fit, flip_side, practical_search_k, zero_tolerance, FitReport, IterationLog, Method, SearchOptions,
};
