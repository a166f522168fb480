//! Expression-tree instances, paraboloid relaxations and gap statistics.

pub mod expr;
pub mod instance;
pub mod metrics;
pub mod oracle;
pub mod relaxation;

pub use expr::{Expr, Interval, Unary};
pub use instance::{parse_instance, ConSense, Constraint, MinlpInstance, Variable};
pub use metrics::{function_census, gap_metrics, parse_solver_result, sgm, GapReport, SolverResult};
pub use oracle::{brute_force_minlp, OracleResult};
pub use relaxation::{
    build_relaxation, find_substitutable, propagate_bounds, to_lp_quadratic, NodeBounds, RelaxedInstance,
    SubstitutionPlan, Variant,
};
