//! Core variables of the stage functions.
//!
//! Costs and constraints depend on the state and input only through
//! `(theta, p, omega, v, q, lambda, qd)`, where the physical force and
//! joint-velocity signals enter linearly via the loopshaping filter. Seeding
//! derivatives on these 48 core directions instead of the 72 state/input
//! directions removes the redundancy, and the chain rule back to `(x, u)` is
//! a sparse rescaling.

use crate::math::{Dual, Real};
use crate::robot::{
    contact_forces, joint_velocities, InputView, LoopshapingFilter, StateView, NU, NX,
};

/// Number of core directions.
pub const NC: usize = 48;
/// Combined decision dimension of one node.
pub const NW: usize = NX + NU;

/// Core variable bundle. Layout: theta 0..3, p 3..6, omega 6..9, v 9..12,
/// q 12..24, lambda 24..36, qd 36..48.
pub struct CoreVars<R: Real> {
    pub euler: [R; 3],
    pub p: [R; 3],
    pub omega: [R; 3],
    pub v: [R; 3],
    pub qj: [R; 12],
    pub lambda: [R; 12],
    pub qd: [R; 12],
}

impl<R: Real> CoreVars<R> {
    pub fn from_views(filter: &LoopshapingFilter, x: &StateView<R>, u: &InputView<R>) -> Self {
        Self {
            euler: x.euler,
            p: x.p,
            omega: x.omega,
            v: x.v,
            qj: x.qj,
            lambda: contact_forces(filter, &x.s_lambda, &u.nu_lambda),
            qd: joint_velocities(filter, &x.s_j, &u.nu_j),
        }
    }

    pub fn leg_joints(&self, leg: usize) -> [R; 3] {
        [
            self.qj[3 * leg],
            self.qj[3 * leg + 1],
            self.qj[3 * leg + 2],
        ]
    }

    pub fn leg_lambda(&self, leg: usize) -> [R; 3] {
        [
            self.lambda[3 * leg],
            self.lambda[3 * leg + 1],
            self.lambda[3 * leg + 2],
        ]
    }

    pub fn leg_qd(&self, leg: usize) -> [R; 3] {
        [
            self.qd[3 * leg],
            self.qd[3 * leg + 1],
            self.qd[3 * leg + 2],
        ]
    }
}

impl CoreVars<f64> {
    pub fn from_slices(filter: &LoopshapingFilter, x: &[f64], u: &[f64]) -> Self {
        let xv = StateView::<f64>::from_slice(x);
        let uv = InputView::<f64>::from_slice(u);
        Self::from_views(filter, &xv, &uv)
    }
}

impl CoreVars<Dual<NC>> {
    /// Seed one dual direction per core variable.
    pub fn seeded(filter: &LoopshapingFilter, x: &[f64], u: &[f64]) -> Self {
        let plain = CoreVars::<f64>::from_slices(filter, x, u);
        let mut euler = [Dual::new(0.0); 3];
        let mut p = [Dual::new(0.0); 3];
        let mut omega = [Dual::new(0.0); 3];
        let mut v = [Dual::new(0.0); 3];
        for i in 0..3 {
            euler[i] = Dual::var(plain.euler[i], i);
            p[i] = Dual::var(plain.p[i], 3 + i);
            omega[i] = Dual::var(plain.omega[i], 6 + i);
            v[i] = Dual::var(plain.v[i], 9 + i);
        }
        let qj = core::array::from_fn(|i| Dual::var(plain.qj[i], 12 + i));
        let lambda = core::array::from_fn(|i| Dual::var(plain.lambda[i], 24 + i));
        let qd = core::array::from_fn(|i| Dual::var(plain.qd[i], 36 + i));
        Self {
            euler,
            p,
            omega,
            v,
            qj,
            lambda,
            qd,
        }
    }
}

/// Expansion of a core index into `(x, u)` columns with chain-rule scales:
/// `(x_index, x_scale, optional (u_index, u_scale))`.
pub fn core_to_decision(filter: &LoopshapingFilter, c: usize) -> (usize, f64, Option<(usize, f64)>) {
    if c < 24 {
        (c, 1.0, None)
    } else if c < 36 {
        let j = c - 24;
        (24 + j, filter.c_lambda, Some((j, filter.d_lambda)))
    } else {
        let j = c - 36;
        (36 + j, filter.c_j, Some((12 + j, filter.d_j)))
    }
}

/// Scatter a core gradient into the 72-dimensional decision gradient.
pub fn expand_gradient(
    filter: &LoopshapingFilter,
    grad_core: &[f64; NC],
    out: &mut nalgebra::DVector<f64>,
) {
    for c in 0..NC {
        let (xi, sx, u) = core_to_decision(filter, c);
        out[xi] += sx * grad_core[c];
        if let Some((ui, su)) = u {
            out[NX + ui] += su * grad_core[c];
        }
    }
}

/// Scatter a core Hessian into the 72x72 decision Hessian.
pub fn expand_hessian(
    filter: &LoopshapingFilter,
    hess_core: &nalgebra::DMatrix<f64>,
    out: &mut nalgebra::DMatrix<f64>,
) {
    let targets: Vec<(usize, f64, Option<(usize, f64)>)> =
        (0..NC).map(|c| core_to_decision(filter, c)).collect();
    for a in 0..NC {
        let (xa, sa, ua) = targets[a];
        for b in 0..NC {
            let v = hess_core[(a, b)];
            if v == 0.0 {
                continue;
            }
            let (xb, sb, ub) = targets[b];
            out[(xa, xb)] += sa * sb * v;
            if let Some((uib, sub)) = ub {
                out[(xa, NX + uib)] += sa * sub * v;
            }
            if let Some((uia, sua)) = ua {
                out[(NX + uia, xb)] += sua * sb * v;
                if let Some((uib, sub)) = ub {
                    out[(NX + uia, NX + uib)] += sua * sub * v;
                }
            }
        }
    }
}
