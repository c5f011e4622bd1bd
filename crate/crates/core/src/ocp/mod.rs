//! Optimal-control-problem assembly: tracking costs, relaxed-barrier soft
//! inequalities, equality constraints, convex foothold regions, and the LQR
//! terminal cost.

mod barrier;
mod core_vars;
mod costs;
mod eval;
mod node;
mod region;
mod terminal;
mod weights;

pub use barrier::{relaxed_barrier, relaxed_barrier_d1, relaxed_barrier_d2};
pub use costs::{
    loopshaping_cost, loopshaping_weights, reference_state, tracking_error, NE,
};
pub use core_vars::{CoreVars, NC, NW};
pub use eval::{
    BarrierFamily,
    equality_constraints, equality_dim, equality_jacobians, stage_constraint_margins, stage_cost,
    stage_cost_quadratics,
    terminal_cost, terminal_cost_quadratics, OcpSetup, SdfScalar,
};
pub use node::{build_nodes, region_residuals, NodeData, RegionParams};
pub use region::{convex_region_around, FootholdRegion, RegionCache};
pub use terminal::{
    cost_to_go, dare_step, lqr_terminal_matrix, min_eigenvalue, solve_dare, stance_lqr_data,
    StanceLqrData, TerminalCostError, RICCATI_MAX_ITERATIONS, RICCATI_TOLERANCE,
};
pub use weights::{BarrierParams, CostWeights};

impl OcpSetup {
    /// Build the full setup: loopshaping weights plus the terminal Riccati
    /// matrix for the nominal stance.
    pub fn new(
        model: crate::robot::QuadrupedModel,
        filter: crate::robot::LoopshapingFilter,
        weights: CostWeights,
        barriers: BarrierParams,
        stance_depth: f64,
        nominal_dt: f64,
    ) -> Result<Self, TerminalCostError> {
        let r_loopshaping = loopshaping_weights(&model, &filter, &weights, stance_depth);
        let mut setup = Self {
            model,
            filter,
            weights,
            barriers,
            r_loopshaping,
            s_terminal: nalgebra::DMatrix::zeros(crate::robot::NX, crate::robot::NX),
        };
        setup.s_terminal = lqr_terminal_matrix(&setup, stance_depth, nominal_dt)?;
        Ok(setup)
    }
}
