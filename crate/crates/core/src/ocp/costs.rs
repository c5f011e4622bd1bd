//! Tracking errors and loopshaping input weights.

use nalgebra::DMatrix;

use crate::math::{
    m3_mul, m3_mul_v3, m3_transpose, rotation_log, rotation_zyx, v3_add, v3_cross, Mat3, Real,
};
use crate::ocp::core_vars::CoreVars;
use crate::ocp::node::NodeData;
use crate::ocp::weights::CostWeights;
use crate::robot::{
    leg_point_jacobian, nominal_stance_joints, InputView, LegChain, LoopshapingFilter,
    QuadrupedModel, StateView, NU,
};

/// Tracking error dimension: 12 base + 4 x 15 leg entries.
pub const NE: usize = 72;

/// Per-leg kinematic quantities shared between costs and constraints.
pub struct LegEval<R: Real> {
    pub chain: LegChain<R>,
    /// Base-frame 3x3 foot Jacobian.
    pub jac: [[R; 3]; 3],
}

pub fn leg_evals<R: Real>(model: &QuadrupedModel, core: &CoreVars<R>) -> [LegEval<R>; 4] {
    core::array::from_fn(|leg| {
        let (jac, chain) = leg_point_jacobian(model, leg, &core.leg_joints(leg), true);
        LegEval { chain, jac }
    })
}

/// Stacked tracking error of one node from the core variables.
///
/// Base block: orientation log-map error, position, angular rate, linear
/// velocity. Per leg: joint positions, joint velocities, world foot
/// position, world foot velocity, base-frame contact force.
pub fn tracking_error_core<R: Real>(
    node: &NodeData,
    core: &CoreVars<R>,
    r_b: &Mat3<R>,
    legs: &[LegEval<R>; 4],
) -> [R; NE] {
    let mut eps = [R::zero(); NE];
    let r_ref_t: Mat3<R> = constm(&m3_transpose(node.r_ref));
    // log(R_B R_ref^T)
    let rel = m3_mul(*r_b, r_ref_t);
    let rot_err = rotation_log(rel);
    for i in 0..3 {
        eps[i] = rot_err[i];
        eps[3 + i] = core.p[i] - R::constant(node.p_ref[i]);
        eps[6 + i] = core.omega[i] - R::constant(node.omega_ref[i]);
        eps[9 + i] = core.v[i] - R::constant(node.v_ref[i]);
    }
    for leg in 0..4 {
        let o = 12 + 15 * leg;
        let q = core.leg_joints(leg);
        let qd_leg = core.leg_qd(leg);
        let lam = core.leg_lambda(leg);
        let eval = &legs[leg];
        let foot_world = v3_add(core.p, m3_mul_v3(*r_b, eval.chain.foot));
        let vel_body = v3_add(
            core.v,
            v3_add(
                v3_cross(core.omega, eval.chain.foot),
                m3_mul_v3(eval.jac, qd_leg),
            ),
        );
        let vel_world = m3_mul_v3(*r_b, vel_body);
        for i in 0..3 {
            eps[o + i] = q[i] - R::constant(node.q_ref[leg][i]);
            // joint velocity reference is zero
            eps[o + 3 + i] = qd_leg[i];
            eps[o + 6 + i] = foot_world[i] - R::constant(node.foot_pos_ref[leg][i]);
            eps[o + 9 + i] = vel_world[i] - R::constant(node.foot_vel_ref[leg][i]);
            eps[o + 12 + i] = lam[i] - R::constant(node.lambda_ref_body[leg][i]);
        }
    }
    eps
}

/// Tracking error from raw state/input views.
pub fn tracking_error<R: Real>(
    model: &QuadrupedModel,
    filter: &LoopshapingFilter,
    node: &NodeData,
    x: &StateView<R>,
    u: &InputView<R>,
) -> [R; NE] {
    let core = CoreVars::from_views(filter, x, u);
    let r_b = rotation_zyx(core.euler);
    let legs = leg_evals(model, &core);
    tracking_error_core(node, &core, &r_b, &legs)
}

fn constm<R: Real>(m: &Mat3<f64>) -> Mat3<R> {
    let mut out = [[R::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = R::constant(m[i][j]);
        }
    }
    out
}

/// Auxiliary-input weight matrix (24x24).
///
/// Scaled from the quadratic approximation of the tracking cost with respect
/// to the physical signals at the nominal stance configuration, pulled back
/// through the direct feedthrough terms of the filters.
pub fn loopshaping_weights(
    model: &QuadrupedModel,
    filter: &LoopshapingFilter,
    weights: &CostWeights,
    stance_depth: f64,
) -> DMatrix<f64> {
    let mut r = DMatrix::<f64>::zeros(NU, NU);
    // force channel: the tracking cost depends on lambda only through its
    // own error rows, so the Hessian w.r.t. lambda is the diagonal weight
    let dl2 = filter.d_lambda * filter.d_lambda;
    for leg in 0..4 {
        for i in 0..3 {
            r[(3 * leg + i, 3 * leg + i)] = dl2 * weights.contact_force[i];
        }
    }
    // joint-velocity channel: diagonal joint-velocity weight plus the foot
    // velocity term through the leg Jacobian at nominal stance
    let q_nom = nominal_stance_joints(model, stance_depth);
    let dj2 = filter.d_j * filter.d_j;
    for leg in 0..4 {
        let q = [q_nom[3 * leg], q_nom[3 * leg + 1], q_nom[3 * leg + 2]];
        let (jac, _) = leg_point_jacobian::<f64>(model, leg, &q, true);
        // H = diag(w_qd) + J^T diag(w_v) J
        let mut h = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                let mut acc = 0.0;
                for k in 0..3 {
                    acc += jac[k][a] * weights.foot_velocity[k] * jac[k][b];
                }
                h[a][b] = acc + if a == b { weights.joint_velocity[a] } else { 0.0 };
            }
        }
        for a in 0..3 {
            for b in 0..3 {
                r[(12 + 3 * leg + a, 12 + 3 * leg + b)] = dj2 * h[a][b];
            }
        }
    }
    r
}

/// Quadratic loopshaping cost `0.5 nu^T R nu`.
pub fn loopshaping_cost(r_matrix: &DMatrix<f64>, u: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..NU {
        for j in 0..NU {
            acc += 0.5 * u[i] * r_matrix[(i, j)] * u[j];
        }
    }
    acc
}

/// Reference state vector of a node (filter states chosen so the filter
/// outputs reproduce the force and joint-velocity references at zero input).
pub fn reference_state(filter: &LoopshapingFilter, node: &NodeData) -> [f64; 48] {
    let mut x = [0.0; 48];
    x[0..3].copy_from_slice(&node.euler_ref);
    x[3..6].copy_from_slice(&node.p_ref);
    x[6..9].copy_from_slice(&node.omega_ref);
    x[9..12].copy_from_slice(&node.v_ref);
    for leg in 0..4 {
        for i in 0..3 {
            x[12 + 3 * leg + i] = node.q_ref[leg][i];
            x[24 + 3 * leg + i] = node.lambda_ref_body[leg][i] / filter.c_lambda;
            // joint velocity reference is zero, so s_j_ref = 0
        }
    }
    x
}
