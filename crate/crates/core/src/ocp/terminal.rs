//! LQR terminal cost: Riccati matrix of the infinite-horizon cost-to-go of
//! the linearized dynamics and quadratized running cost at the nominal
//! stance configuration.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::ocp::costs::reference_state;
use crate::ocp::eval::{stage_cost_quadratics, OcpSetup};
use crate::ocp::node::NodeData;
use crate::robot::{
    dynamics_with_jacobians, DynamicsError, DynamicsParams, NU, NX,
};

pub const RICCATI_TOLERANCE: f64 = 1e-9;
pub const RICCATI_MAX_ITERATIONS: usize = 10_000;

#[derive(Debug, Error)]
pub enum TerminalCostError {
    #[error("terminal Riccati iteration did not converge: residual {residual} after {iterations} iterations")]
    RiccatiDiverged { iterations: usize, residual: f64 },
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Data of the discrete LQR problem at the nominal stance.
pub struct StanceLqrData {
    pub a_d: DMatrix<f64>,
    pub b_d: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    /// Cross term d^2 l / dx du (48 x 24).
    pub n: DMatrix<f64>,
}

/// Linearize the dynamics and quadratize the running cost at the nominal
/// stance, discretized with the nominal node spacing.
pub fn stance_lqr_data(setup: &OcpSetup, stance_depth: f64, dt: f64) -> Result<StanceLqrData, TerminalCostError> {
    let node = NodeData::stance_template(&setup.model, stance_depth, 0.0);
    let x_nom = reference_state(&setup.filter, &node);
    let u_nom = [0.0; NU];
    let params = DynamicsParams {
        contacts: [true; 4],
        tau_dist: [0.0; 6],
    };
    let (_, a_c, b_c) =
        dynamics_with_jacobians(&setup.model, &setup.filter, &x_nom, &u_nom, &params)?;
    // explicit midpoint discretization of the linearized system
    let eye = DMatrix::<f64>::identity(NX, NX);
    let a_d = &eye + &a_c * dt + (&a_c * &a_c) * (0.5 * dt * dt);
    let b_d = &b_c * dt + (&a_c * &b_c) * (0.5 * dt * dt);

    let (_, _, hess) = stage_cost_quadratics(setup, &node, None, &x_nom, &u_nom);
    let q = hess.view((0, 0), (NX, NX)).into_owned() * dt;
    let r = hess.view((NX, NX), (NU, NU)).into_owned() * dt;
    let n = hess.view((0, NX), (NX, NU)).into_owned() * dt;
    Ok(StanceLqrData { a_d, b_d, q, r, n })
}

/// Backward iteration of the discrete algebraic Riccati equation with cross
/// terms, to a fixed point.
pub fn solve_dare(data: &StanceLqrData) -> Result<DMatrix<f64>, TerminalCostError> {
    let mut s = data.q.clone();
    for iteration in 0..RICCATI_MAX_ITERATIONS {
        let next = dare_step(data, &s);
        let diff = (&next - &s).amax();
        s = next;
        if diff <= RICCATI_TOLERANCE {
            return Ok(s);
        }
        if !diff.is_finite() {
            return Err(TerminalCostError::RiccatiDiverged {
                iterations: iteration,
                residual: diff,
            });
        }
    }
    let residual = (&dare_step(data, &s) - &s).amax();
    Err(TerminalCostError::RiccatiDiverged {
        iterations: RICCATI_MAX_ITERATIONS,
        residual,
    })
}

/// One application of the Riccati recursion; the fixed-point residual
/// `|dare_step(S) - S|` is the convergence certificate.
pub fn dare_step(data: &StanceLqrData, s: &DMatrix<f64>) -> DMatrix<f64> {
    let asb = data.a_d.transpose() * s * &data.b_d + &data.n;
    let rbb = &data.r + data.b_d.transpose() * s * &data.b_d;
    let gain = rbb
        .clone()
        .cholesky()
        .map(|c| c.solve(&asb.transpose()))
        .unwrap_or_else(|| {
            rbb.clone()
                .lu()
                .solve(&asb.transpose())
                .expect("control-weight block must be invertible")
        });
    let next = &data.q + data.a_d.transpose() * s * &data.a_d - &asb * &gain;
    // symmetrize to suppress drift
    let sym = (&next + next.transpose()) * 0.5;
    sym
}

/// Terminal Riccati matrix for the given model configuration.
pub fn lqr_terminal_matrix(
    setup: &OcpSetup,
    stance_depth: f64,
    dt: f64,
) -> Result<DMatrix<f64>, TerminalCostError> {
    let data = stance_lqr_data(setup, stance_depth, dt)?;
    solve_dare(&data)
}

/// Smallest eigenvalue of a symmetric matrix (diagnostics).
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Quadratic form `0.5 d^T S d` for a deviation vector.
pub fn cost_to_go(s: &DMatrix<f64>, d: &DVector<f64>) -> f64 {
    0.5 * d.dot(&(s * d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ocp::costs::loopshaping_weights;
    use crate::ocp::weights::{BarrierParams, CostWeights};
    use crate::robot::{LoopshapingFilter, QuadrupedModel};

    fn make_setup() -> OcpSetup {
        let model = QuadrupedModel::default();
        let filter = LoopshapingFilter::default();
        let weights = CostWeights::default();
        let r = loopshaping_weights(&model, &filter, &weights, 0.5);
        OcpSetup {
            model,
            filter,
            weights,
            barriers: BarrierParams::default(),
            r_loopshaping: r,
            s_terminal: DMatrix::identity(NX, NX),
        }
    }

    #[test]
    fn terminal_riccati_converges_and_is_psd() {
        let setup = make_setup();
        let data = stance_lqr_data(&setup, 0.5, 0.015).unwrap();
        let s = solve_dare(&data).unwrap();
        // symmetry
        let asym = (&s - s.transpose()).amax();
        assert!(asym <= 1e-9, "asymmetry {asym}");
        // positive semidefinite
        let min_eig = min_eigenvalue(&s);
        assert!(min_eig >= -1e-8, "min eigenvalue {min_eig}");
        // fixed point residual
        let residual = (&dare_step(&data, &s) - &s).amax();
        assert!(residual <= 1e-7, "fixed point residual {residual}");
    }
}
