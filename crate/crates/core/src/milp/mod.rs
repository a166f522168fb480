//! Mixed-integer linear models and the built-in exact solver.

mod bnb;
mod lpfile;
mod model;
mod simplex;

pub use bnb::{solve_lp_relaxation, solve_milp, MilpSolution, MilpStats, MilpStatus, SolveLimits, SolveOptions, FEAS_TOL, GAP_ABS};
pub use lpfile::{export_lp, import_solution, parse_lp, sanitize_name, ImportedSolution};
pub use model::{check_dense, check_point_feasible, Constraint, FeasibilityReport, MilpModel, Sense, VarKind, Variable, Violation};
