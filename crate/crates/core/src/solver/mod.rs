//! Multiple-shooting SQP solver with real-time iteration, equality
//! constraint projection, a Riccati-based QP solve, and a filter
//! line-search.

mod grid;
mod line_search;
mod mpc;
mod riccati;
mod sqp;

pub use grid::NodeGrid;
pub use line_search::{
    filter_line_search, LineSearchBranch, LineSearchParams, LineSearchResult,
};
pub use mpc::{MpcController, Plan, PlanOutcome, SolveMode};
pub use riccati::{
    apply_projection, project_equalities, riccati_solve, LqProblem, LqStage, NodeProjection,
    QpError, RiccatiSolution,
};
pub use sqp::{
    cold_start, shift_solution, solve_to_convergence, sqp_step, ConvergedSolve,
    IterationTelemetry, OcpInstance, ShootingSolution, SolverError, SolverSettings, StepOutcome,
};
