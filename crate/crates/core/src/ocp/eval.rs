//! Stage cost, soft constraints, and equality constraints of one node.
//!
//! Everything is written once over a generic scalar on the 48 core
//! variables; the `f64` instantiation serves the line-search and the dual
//! instantiation produces exact gradients for the Gauss-Newton / SCQP
//! blocks, which are then expanded to the 72 decision directions through the
//! linear filter maps.

use nalgebra::{DMatrix, DVector};

use crate::math::{m3_mul_v3, rotation_zyx, v3_add, v3_cross, Dual, Real};
use crate::ocp::barrier::{relaxed_barrier, relaxed_barrier_d1, relaxed_barrier_d2};
use crate::ocp::core_vars::{expand_gradient, expand_hessian, CoreVars, NC, NW};
use crate::ocp::costs::{leg_evals, reference_state, tracking_error_core, LegEval, NE};
use crate::ocp::node::NodeData;
use crate::ocp::weights::{BarrierParams, CostWeights};
use crate::robot::{LoopshapingFilter, QuadrupedModel, NU, NX};
use crate::sdf::SignedDistanceField;

/// Scalars that can sample the SDF: plain values read the field, duals chain
/// the stored voxel gradient.
pub trait SdfScalar: Real {
    /// Returns `(value, in_bounds)`.
    fn sdf_sample(sdf: &SignedDistanceField, p: [Self; 3]) -> (Self, bool);
}

impl SdfScalar for f64 {
    fn sdf_sample(sdf: &SignedDistanceField, p: [Self; 3]) -> (Self, bool) {
        let s = sdf.query(p);
        (s.value, !s.out_of_bounds)
    }
}

impl<const N: usize> SdfScalar for Dual<N> {
    fn sdf_sample(sdf: &SignedDistanceField, p: [Self; 3]) -> (Self, bool) {
        let s = sdf.query([p[0].v, p[1].v, p[2].v]);
        let mut out = Dual::new(s.value);
        for k in 0..N {
            out.d[k] = s.gradient[0] * p[0].d[k]
                + s.gradient[1] * p[1].d[k]
                + s.gradient[2] * p[2].d[k];
        }
        (out, !s.out_of_bounds)
    }
}

/// Fixed problem data shared by all nodes of one MPC instance.
pub struct OcpSetup {
    pub model: QuadrupedModel,
    pub filter: LoopshapingFilter,
    pub weights: CostWeights,
    pub barriers: BarrierParams,
    /// Precomputed 24x24 auxiliary-input weight.
    pub r_loopshaping: DMatrix<f64>,
    /// Terminal Riccati matrix (48x48).
    pub s_terminal: DMatrix<f64>,
}

/// Soft-constraint family, used for diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BarrierFamily {
    JointPosition,
    JointVelocity,
    Torque,
    FrictionCone,
    Foothold,
    Collision,
}

/// Soft inequality list of one node: `(h, mu, delta, family)` per scalar
/// constraint.
struct StageResiduals<R: Real> {
    eps: [R; NE],
    barriers: Vec<(R, f64, f64, BarrierFamily)>,
}

fn stage_residuals<R: SdfScalar>(
    setup: &OcpSetup,
    node: &NodeData,
    sdf: Option<&SignedDistanceField>,
    core: &CoreVars<R>,
) -> StageResiduals<R> {
    let model = &setup.model;
    let r_b = rotation_zyx(core.euler);
    let legs: [LegEval<R>; 4] = leg_evals(model, core);
    let eps = tracking_error_core(node, core, &r_b, &legs);
    let mut barriers: Vec<(R, f64, f64, BarrierFamily)> = Vec::with_capacity(96);

    let (mu_qp, delta_qp) = setup.barriers.joint_position;
    let (mu_qv, delta_qv) = setup.barriers.joint_velocity;
    let (mu_tau, delta_tau) = setup.barriers.torque;
    let (mu_f, delta_f) = setup.barriers.friction_cone;
    let (mu_t, delta_t) = setup.barriers.foothold;
    let (mu_d, delta_d) = setup.barriers.collision;

    for leg in 0..4 {
        let q = core.leg_joints(leg);
        let lam = core.leg_lambda(leg);
        let eval = &legs[leg];
        // joint limits: position, velocity, torque boxes
        for i in 0..3 {
            let (lo, hi) = (model.q_lower[i], model.q_upper[i]);
            barriers.push((
                R::constant(hi) - q[i],
                mu_qp,
                delta_qp,
                BarrierFamily::JointPosition,
            ));
            barriers.push((
                q[i] - R::constant(lo),
                mu_qp,
                delta_qp,
                BarrierFamily::JointPosition,
            ));
            let qd_i = core.qd[3 * leg + i];
            barriers.push((
                R::constant(model.qd_limit) - qd_i,
                mu_qv,
                delta_qv,
                BarrierFamily::JointVelocity,
            ));
            barriers.push((
                qd_i + R::constant(model.qd_limit),
                mu_qv,
                delta_qv,
                BarrierFamily::JointVelocity,
            ));
            // static-equilibrium torque: tau = J_leg^T lambda
            let tau =
                eval.jac[0][i] * lam[0] + eval.jac[1][i] * lam[1] + eval.jac[2][i] * lam[2];
            barriers.push((
                R::constant(model.tau_limit) - tau,
                mu_tau,
                delta_tau,
                BarrierFamily::Torque,
            ));
            barriers.push((
                tau + R::constant(model.tau_limit),
                mu_tau,
                delta_tau,
                BarrierFamily::Torque,
            ));
        }

        if node.contacts[leg] {
            // friction cone in the terrain frame
            let f_world = m3_mul_v3(r_b, lam);
            let rt = node.terrain_rot[leg];
            let f_t = [
                R::constant(rt[0][0]) * f_world[0]
                    + R::constant(rt[0][1]) * f_world[1]
                    + R::constant(rt[0][2]) * f_world[2],
                R::constant(rt[1][0]) * f_world[0]
                    + R::constant(rt[1][1]) * f_world[1]
                    + R::constant(rt[1][2]) * f_world[2],
                R::constant(rt[2][0]) * f_world[0]
                    + R::constant(rt[2][1]) * f_world[1]
                    + R::constant(rt[2][2]) * f_world[2],
            ];
            let eps2 = setup.barriers.friction_epsilon * setup.barriers.friction_epsilon;
            let tangent = (f_t[0] * f_t[0] + f_t[1] * f_t[1] + R::constant(eps2)).sqrt();
            let h_cone = R::constant(model.friction_coeff) * f_t[2] - tangent;
            barriers.push((h_cone, mu_f, delta_f, BarrierFamily::FrictionCone));

            // foothold half-spaces on the world foot position
            if let Some(region) = &node.regions[leg] {
                let foot_world = v3_add(core.p, m3_mul_v3(r_b, eval.chain.foot));
                for (a, b) in &region.rows {
                    let h = R::constant(a[0]) * foot_world[0]
                        + R::constant(a[1]) * foot_world[1]
                        + R::constant(a[2]) * foot_world[2]
                        + R::constant(*b);
                    barriers.push((h, mu_t, delta_t, BarrierFamily::Foothold));
                }
            }
        }

        // collision spheres: knees always, feet only in swing
        if let Some(sdf) = sdf {
            let knee_world = v3_add(core.p, m3_mul_v3(r_b, eval.chain.knee));
            let (d_knee, inside) = R::sdf_sample(sdf, knee_world);
            if inside {
                barriers.push((
                    d_knee - R::constant(model.knee_radius),
                    mu_d,
                    delta_d,
                    BarrierFamily::Collision,
                ));
            }
            if !node.contacts[leg] {
                let foot_world = v3_add(core.p, m3_mul_v3(r_b, eval.chain.foot));
                let (d_foot, inside) = R::sdf_sample(sdf, foot_world);
                if inside {
                    let h =
                        d_foot - R::constant(model.foot_radius) - R::constant(node.dmin[leg]);
                    barriers.push((h, mu_d, delta_d, BarrierFamily::Collision));
                }
            }
        }
    }
    StageResiduals { eps, barriers }
}

/// Per-family minimum soft-constraint margins of one node (diagnostics).
///
/// Order: joint position, joint velocity, torque, friction cone, foothold,
/// collision.
pub fn stage_constraint_margins(
    setup: &OcpSetup,
    node: &NodeData,
    sdf: Option<&SignedDistanceField>,
    x: &[f64],
    u: &[f64],
) -> [f64; 6] {
    let core = CoreVars::<f64>::from_slices(&setup.filter, x, u);
    let res = stage_residuals(setup, node, sdf, &core);
    let mut mins = [f64::INFINITY; 6];
    for &(h, _, _, family) in &res.barriers {
        let slot = match family {
            BarrierFamily::JointPosition => 0,
            BarrierFamily::JointVelocity => 1,
            BarrierFamily::Torque => 2,
            BarrierFamily::FrictionCone => 3,
            BarrierFamily::Foothold => 4,
            BarrierFamily::Collision => 5,
        };
        mins[slot] = mins[slot].min(h);
    }
    mins
}

/// Unscaled running cost `L(x, u, t)` of one node.
pub fn stage_cost(
    setup: &OcpSetup,
    node: &NodeData,
    sdf: Option<&SignedDistanceField>,
    x: &[f64],
    u: &[f64],
) -> f64 {
    let core = CoreVars::<f64>::from_slices(&setup.filter, x, u);
    let res = stage_residuals(setup, node, sdf, &core);
    let w = setup.weights.stacked();
    let mut cost = 0.0;
    for i in 0..NE {
        cost += 0.5 * w[i] * res.eps[i] * res.eps[i];
    }
    for &(h, mu, delta, _) in &res.barriers {
        cost += relaxed_barrier(h, mu, delta);
    }
    cost + crate::ocp::costs::loopshaping_cost(&setup.r_loopshaping, u)
}

/// Quadratic model of the unscaled running cost: value, gradient, and a
/// positive semi-definite Hessian (Gauss-Newton for the tracking term, exact
/// for the quadratic loopshaping cost, SCQP for the penalties).
pub fn stage_cost_quadratics(
    setup: &OcpSetup,
    node: &NodeData,
    sdf: Option<&SignedDistanceField>,
    x: &[f64],
    u: &[f64],
) -> (f64, DVector<f64>, DMatrix<f64>) {
    let core = CoreVars::<Dual<NC>>::seeded(&setup.filter, x, u);
    let res = stage_residuals(setup, node, sdf, &core);
    let w = setup.weights.stacked();

    // stack all residual rows: tracking rows weighted by w, barrier rows by
    // the penalty curvature
    let rows = NE + res.barriers.len();
    let mut jac = DMatrix::<f64>::zeros(rows, NC);
    let mut scaled = DMatrix::<f64>::zeros(NC, rows);
    let mut grad_core = [0.0; NC];
    let mut cost = 0.0;
    for i in 0..NE {
        let e = &res.eps[i];
        cost += 0.5 * w[i] * e.v * e.v;
        let g = w[i] * e.v;
        for c in 0..NC {
            jac[(i, c)] = e.d[c];
            scaled[(c, i)] = w[i] * e.d[c];
            grad_core[c] += g * e.d[c];
        }
    }
    for (bi, (h, mu, delta, _)) in res.barriers.iter().enumerate() {
        let i = NE + bi;
        cost += relaxed_barrier(h.v, *mu, *delta);
        let d1 = relaxed_barrier_d1(h.v, *mu, *delta);
        let d2 = relaxed_barrier_d2(h.v, *mu, *delta);
        for c in 0..NC {
            jac[(i, c)] = h.d[c];
            scaled[(c, i)] = d2 * h.d[c];
            grad_core[c] += d1 * h.d[c];
        }
    }
    let hess_core = &scaled * &jac;

    let mut grad = DVector::<f64>::zeros(NW);
    let mut hess = DMatrix::<f64>::zeros(NW, NW);
    expand_gradient(&setup.filter, &grad_core, &mut grad);
    expand_hessian(&setup.filter, &hess_core, &mut hess);

    // loopshaping: exact quadratic in u
    cost += crate::ocp::costs::loopshaping_cost(&setup.r_loopshaping, u);
    for a in 0..NU {
        for b in 0..NU {
            let r = setup.r_loopshaping[(a, b)];
            grad[NX + a] += r * u[b];
            hess[(NX + a, NX + b)] += r;
        }
    }
    (cost, grad, hess)
}

/// Terminal cost `0.5 (x - x_ref)^T S (x - x_ref)` with value, gradient, and
/// Hessian.
pub fn terminal_cost_quadratics(
    setup: &OcpSetup,
    node: &NodeData,
    x: &[f64],
) -> (f64, DVector<f64>, DMatrix<f64>) {
    let x_ref = reference_state(&setup.filter, node);
    let d = DVector::from_fn(NX, |i, _| x[i] - x_ref[i]);
    let s = &setup.s_terminal;
    let sd = s * &d;
    let cost = 0.5 * d.dot(&sd);
    (cost, sd, s.clone())
}

pub fn terminal_cost(setup: &OcpSetup, node: &NodeData, x: &[f64]) -> f64 {
    let x_ref = reference_state(&setup.filter, node);
    let d = DVector::from_fn(NX, |i, _| x[i] - x_ref[i]);
    0.5 * d.dot(&(&setup.s_terminal * &d))
}

/// Number of equality constraint rows of a node.
pub fn equality_dim(node: &NodeData) -> usize {
    if node.terminal {
        return 0;
    }
    node.contacts
        .iter()
        .map(|&c| if c { 3 } else { 4 })
        .sum()
}

fn equality_residuals<R: Real>(
    setup: &OcpSetup,
    node: &NodeData,
    core: &CoreVars<R>,
) -> Vec<R> {
    let model = &setup.model;
    let mut g = Vec::with_capacity(16);
    if node.terminal {
        return g;
    }
    let r_b = rotation_zyx(core.euler);
    let kp = setup.barriers.swing_kp;
    for leg in 0..4 {
        let q = core.leg_joints(leg);
        let qd_leg = core.leg_qd(leg);
        let (jac, chain) = crate::robot::leg_point_jacobian(model, leg, &q, true);
        let vel_body = v3_add(
            core.v,
            v3_add(v3_cross(core.omega, chain.foot), m3_mul_v3(jac, qd_leg)),
        );
        let vel_world = m3_mul_v3(r_b, vel_body);
        if node.contacts[leg] {
            // stance: zero foot velocity
            for i in 0..3 {
                g.push(vel_world[i]);
            }
        } else {
            // swing: zero force, and normal-direction reference tracking
            let lam = core.leg_lambda(leg);
            for i in 0..3 {
                g.push(lam[i]);
            }
            let foot_world = v3_add(core.p, m3_mul_v3(r_b, chain.foot));
            let n = node.swing_normal[leg];
            let mut row = R::zero();
            for i in 0..3 {
                let dv = vel_world[i] - R::constant(node.foot_vel_ref[leg][i]);
                let dp = foot_world[i] - R::constant(node.foot_pos_ref[leg][i]);
                row = row + R::constant(n[i]) * (dv + R::constant(kp) * dp);
            }
            g.push(row);
        }
    }
    g
}

/// Equality constraint values.
pub fn equality_constraints(
    setup: &OcpSetup,
    node: &NodeData,
    x: &[f64],
    u: &[f64],
) -> DVector<f64> {
    let core = CoreVars::<f64>::from_slices(&setup.filter, x, u);
    DVector::from_vec(equality_residuals(setup, node, &core))
}

/// Equality constraints with Jacobians `(g, dg/dx, dg/du)`.
pub fn equality_jacobians(
    setup: &OcpSetup,
    node: &NodeData,
    x: &[f64],
    u: &[f64],
) -> (DVector<f64>, DMatrix<f64>, DMatrix<f64>) {
    let core = CoreVars::<Dual<NC>>::seeded(&setup.filter, x, u);
    let g = equality_residuals(setup, node, &core);
    let n = g.len();
    let mut value = DVector::zeros(n);
    let mut gx = DMatrix::zeros(n, NX);
    let mut gu = DMatrix::zeros(n, NU);
    let filter = &setup.filter;
    for (i, gi) in g.iter().enumerate() {
        value[i] = gi.v;
        for c in 0..NC {
            let d = gi.d[c];
            if d == 0.0 {
                continue;
            }
            let (xi, sx, uref) = crate::ocp::core_vars::core_to_decision(filter, c);
            gx[(i, xi)] += sx * d;
            if let Some((ui, su)) = uref {
                gu[(i, ui)] += su * d;
            }
        }
    }
    (value, gx, gu)
}
