//! Torso dynamics and the continuous-time MPC model.
//!
//! The generalized velocity is the body-frame base twist `[omega_B, v_B]`
//! followed by the joint rates. Base acceleration comes from the composite
//! rigid-body inertia and the Newton-Euler bias wrench aggregated about the
//! base origin, with joint accelerations treated as zero (no inertial
//! coupling from the legs). Contact forces are expressed in the base frame.

use thiserror::Error;

use crate::math::{
    euler_rate_map, m3_mul, m3_mul_v3, m3_transpose, m6_solve_spd, rotation_zyx, v3_add,
    v3_cross, v3_scale, v3_sub, Dual, Mat3, Mat6, Real, Vec3, Vec6,
};
use crate::robot::kinematics::{leg_chain, LegChain};
use crate::robot::model::{
    contact_forces, joint_velocities, InputView, LoopshapingFilter, QuadrupedModel, StateView,
    NUM_LEGS, NX, NU, PITCH_GUARD_MARGIN,
};

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("pitch {0} outside the gimbal guard range")]
    GimbalGuard(f64),
    #[error("composite inertia is not positive definite")]
    SingularInertia,
}

/// Constant per-evaluation parameters of the vector field.
#[derive(Clone, Copy, Debug)]
pub struct DynamicsParams {
    pub contacts: [bool; NUM_LEGS],
    /// Disturbance wrench on the base `[moment, force]`, body frame.
    pub tau_dist: [f64; 6],
}

impl Default for DynamicsParams {
    fn default() -> Self {
        Self {
            contacts: [true; NUM_LEGS],
            tau_dist: [0.0; 6],
        }
    }
}

struct LinkState<R: Real> {
    /// Center of mass in base coordinates.
    com: Vec3<R>,
    rot: Mat3<R>,
    mass: f64,
    inertia_local: [f64; 3],
    /// Absolute angular velocity, base coordinates.
    w: Vec3<R>,
    /// Absolute angular acceleration at zero generalized acceleration.
    alpha: Vec3<R>,
    /// Absolute linear acceleration of the com at zero generalized accel.
    a_com: Vec3<R>,
}

/// Walk all links with their bias kinematics, calling `visit` per link.
///
/// `omega`/`v` are the base twist; velocities and accelerations are world
/// quantities expressed in the base frame with all generalized accelerations
/// set to zero, which is exactly what the bias wrench needs.
fn visit_links<R: Real>(
    model: &QuadrupedModel,
    qj: &[R; 12],
    qd_j: &[R; 12],
    omega: Vec3<R>,
    v: Vec3<R>,
    mut visit: impl FnMut(&LinkState<R>),
) {
    let a_origin = v3_cross(omega, v);
    let torso_com = [
        R::constant(model.torso_com[0]),
        R::constant(model.torso_com[1]),
        R::constant(model.torso_com[2]),
    ];
    visit(&LinkState {
        com: torso_com,
        rot: crate::math::m3_identity(),
        mass: model.torso_mass,
        inertia_local: model.torso_inertia,
        w: omega,
        alpha: [R::zero(); 3],
        a_com: v3_add(
            a_origin,
            v3_cross(omega, v3_cross(omega, torso_com)),
        ),
    });
    for leg in 0..NUM_LEGS {
        let q = [qj[3 * leg], qj[3 * leg + 1], qj[3 * leg + 2]];
        let qd = [qd_j[3 * leg], qd_j[3 * leg + 1], qd_j[3 * leg + 2]];
        let chain: LegChain<R> = leg_chain(model, leg, &q);
        let ax1 = [R::one(), R::zero(), R::zero()];
        let ax_y = m3_mul_v3(chain.r_hip, [R::zero(), R::one(), R::zero()]);

        // angular velocity chain
        let w_hip = v3_add(omega, v3_scale(qd[0], ax1));
        let w_thigh = v3_add(w_hip, v3_scale(qd[1], ax_y));
        let w_shank = v3_add(w_thigh, v3_scale(qd[2], ax_y));
        // angular accelerations with q_dd = 0: alpha_child = alpha_parent +
        // (w_parent x a) qd
        let al_hip = v3_scale(qd[0], v3_cross(omega, ax1));
        let al_thigh = v3_add(al_hip, v3_scale(qd[1], v3_cross(w_hip, ax_y)));
        let al_shank = v3_add(al_thigh, v3_scale(qd[2], v3_cross(w_thigh, ax_y)));

        // linear acceleration of the hip point (fixed on the torso)
        let a_hip = v3_add(
            a_origin,
            v3_cross(omega, v3_cross(omega, chain.hip)),
        );
        // knee point fixed on the thigh
        let knee_arm = v3_sub(chain.knee, chain.hip);
        let a_knee = v3_add(
            a_hip,
            v3_add(
                v3_cross(al_thigh, knee_arm),
                v3_cross(w_thigh, v3_cross(w_thigh, knee_arm)),
            ),
        );

        let masses = model.link_masses;
        // hip link: lumped at the hip point
        visit(&LinkState {
            com: chain.hip,
            rot: chain.r_hip,
            mass: masses[0],
            inertia_local: model.link_inertia(0),
            w: w_hip,
            alpha: al_hip,
            a_com: a_hip,
        });
        // thigh: com halfway down
        let thigh_arm = v3_scale(R::constant(0.5), knee_arm);
        visit(&LinkState {
            com: v3_add(chain.hip, thigh_arm),
            rot: chain.r_thigh,
            mass: masses[1],
            inertia_local: model.link_inertia(1),
            w: w_thigh,
            alpha: al_thigh,
            a_com: v3_add(
                a_hip,
                v3_add(
                    v3_cross(al_thigh, thigh_arm),
                    v3_cross(w_thigh, v3_cross(w_thigh, thigh_arm)),
                ),
            ),
        });
        // shank: com halfway from knee to foot
        let shank_arm = v3_scale(R::constant(0.5), v3_sub(chain.foot, chain.knee));
        visit(&LinkState {
            com: v3_add(chain.knee, shank_arm),
            rot: chain.r_shank,
            mass: masses[2],
            inertia_local: model.link_inertia(2),
            w: w_shank,
            alpha: al_shank,
            a_com: v3_add(
                a_knee,
                v3_add(
                    v3_cross(al_shank, shank_arm),
                    v3_cross(w_shank, v3_cross(w_shank, shank_arm)),
                ),
            ),
        });
    }
}

fn world_inertia<R: Real>(rot: &Mat3<R>, diag: &[f64; 3]) -> Mat3<R> {
    // R * diag * R^T
    let mut scaled = *rot;
    for col in 0..3 {
        let s = R::constant(diag[col]);
        for row in 0..3 {
            scaled[row][col] = scaled[row][col] * s;
        }
    }
    m3_mul(scaled, m3_transpose(*rot))
}

/// Composite rigid-body inertia of the whole robot about the base origin,
/// `[omega, v]` coordinates in the base frame.
pub fn composite_base_inertia<R: Real>(model: &QuadrupedModel, qj: &[R; 12]) -> Mat6<R> {
    let zero_qd = [R::zero(); 12];
    let mut m6 = crate::math::m6_zero::<R>();
    visit_links(model, qj, &zero_qd, [R::zero(); 3], [R::zero(); 3], |link| {
        accumulate_inertia(&mut m6, link);
    });
    m6
}

fn accumulate_inertia<R: Real>(m6: &mut Mat6<R>, link: &LinkState<R>) {
    {
        let m = R::constant(link.mass);
        let i_b = world_inertia(&link.rot, &link.inertia_local);
        let r = link.com;
        // M_ww = I_b - m S(r) S(r)
        for i in 0..3 {
            for j in 0..3 {
                m6[i][j] = m6[i][j] + i_b[i][j];
            }
        }
        // -m S(r)S(r) = m (|r|^2 I - r r^T)
        let r2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
        for i in 0..3 {
            for j in 0..3 {
                let eye = if i == j { r2 } else { R::zero() };
                m6[i][j] = m6[i][j] + m * (eye - r[i] * r[j]);
            }
        }
        // M_wv = m S(r), M_vw = transpose
        let s = crate::math::skew(r);
        for i in 0..3 {
            for j in 0..3 {
                m6[i][3 + j] = m6[i][3 + j] + m * s[i][j];
                m6[3 + j][i] = m6[3 + j][i] + m * s[i][j];
            }
        }
        for i in 0..3 {
            m6[3 + i][3 + i] = m6[3 + i][3 + i] + m;
        }
    }
}

/// Bias wrench about the base origin (gravity, Coriolis, centrifugal), base
/// coordinates; equals the generalized force at zero generalized
/// acceleration.
pub fn bias_wrench<R: Real>(
    model: &QuadrupedModel,
    euler: &Vec3<R>,
    qj: &[R; 12],
    qd_j: &[R; 12],
    omega: Vec3<R>,
    v: Vec3<R>,
) -> Vec6<R> {
    let r_base = rotation_zyx(*euler);
    // gravity acceleration in base coordinates
    let g_b = m3_mul_v3(
        m3_transpose(r_base),
        [R::zero(), R::zero(), R::constant(-model.gravity)],
    );
    let mut moment = [R::zero(); 3];
    let mut force = [R::zero(); 3];
    visit_links(model, qj, qd_j, omega, v, |link| {
        accumulate_bias(&mut moment, &mut force, g_b, link);
    });
    [moment[0], moment[1], moment[2], force[0], force[1], force[2]]
}

fn accumulate_bias<R: Real>(
    moment: &mut Vec3<R>,
    force: &mut Vec3<R>,
    g_b: Vec3<R>,
    link: &LinkState<R>,
) {
    let m = R::constant(link.mass);
    let f = v3_scale(m, v3_sub(link.a_com, g_b));
    let i_b = world_inertia(&link.rot, &link.inertia_local);
    let n = v3_add(
        m3_mul_v3(i_b, link.alpha),
        v3_cross(link.w, m3_mul_v3(i_b, link.w)),
    );
    *moment = v3_add(*moment, v3_add(v3_cross(link.com, f), n));
    *force = v3_add(*force, f);
}

/// Base acceleration `[omega_dot, v_dot]` under the given contact forces
/// (base frame, one 3-vector per leg, only contact legs applied).
pub fn base_acceleration<R: Real>(
    model: &QuadrupedModel,
    euler: &Vec3<R>,
    qj: &[R; 12],
    qd_j: &[R; 12],
    omega: Vec3<R>,
    v: Vec3<R>,
    lambda: &[R; 12],
    contacts: &[bool; NUM_LEGS],
    tau_dist: &[f64; 6],
) -> Option<Vec6<R>> {
    let r_base = rotation_zyx(*euler);
    let g_b = m3_mul_v3(
        m3_transpose(r_base),
        [R::zero(), R::zero(), R::constant(-model.gravity)],
    );
    let mut m6 = crate::math::m6_zero::<R>();
    let mut moment = [R::zero(); 3];
    let mut force = [R::zero(); 3];
    visit_links(model, qj, qd_j, omega, v, |link| {
        accumulate_inertia(&mut m6, link);
        accumulate_bias(&mut moment, &mut force, g_b, link);
    });
    let n_b = [moment[0], moment[1], moment[2], force[0], force[1], force[2]];
    let mut rhs = [R::zero(); 6];
    for i in 0..6 {
        rhs[i] = R::constant(tau_dist[i]) - n_b[i];
    }
    for leg in 0..NUM_LEGS {
        if !contacts[leg] {
            continue;
        }
        let chain = leg_chain(model, leg, &[qj[3 * leg], qj[3 * leg + 1], qj[3 * leg + 2]]);
        let f = [lambda[3 * leg], lambda[3 * leg + 1], lambda[3 * leg + 2]];
        let n = v3_cross(chain.foot, f);
        for i in 0..3 {
            rhs[i] = rhs[i] + n[i];
            rhs[3 + i] = rhs[3 + i] + f[i];
        }
    }
    m6_solve_spd(&m6, &rhs)
}

/// Continuous-time MPC vector field, scalar-generic.
///
/// No gimbal check here; the `f64` wrapper validates the pitch range.
pub fn continuous_dynamics_view<R: Real>(
    model: &QuadrupedModel,
    filter: &LoopshapingFilter,
    x: &StateView<R>,
    u: &InputView<R>,
    params: &DynamicsParams,
) -> [R; NX] {
    let lambda = contact_forces(filter, &x.s_lambda, &u.nu_lambda);
    let qd_j = joint_velocities(filter, &x.s_j, &u.nu_j);
    let r = rotation_zyx(x.euler);
    let t = euler_rate_map(x.euler);
    let euler_dot = m3_mul_v3(t, x.omega);
    let p_dot = m3_mul_v3(r, x.v);
    let accel = base_acceleration(
        model,
        &x.euler,
        &x.qj,
        &qd_j,
        x.omega,
        x.v,
        &lambda,
        &params.contacts,
        &params.tau_dist,
    )
    .expect("composite inertia is positive definite for positive masses");
    let mut out = [R::zero(); NX];
    out[0..3].copy_from_slice(&euler_dot);
    out[3..6].copy_from_slice(&p_dot);
    out[6..9].copy_from_slice(&accel[0..3]);
    out[9..12].copy_from_slice(&accel[3..6]);
    out[12..24].copy_from_slice(&qd_j);
    out[24..36].copy_from_slice(&u.nu_lambda);
    out[36..48].copy_from_slice(&u.nu_j);
    out
}

/// `f64` evaluation with the gimbal guard.
pub fn continuous_dynamics(
    model: &QuadrupedModel,
    filter: &LoopshapingFilter,
    x: &[f64; NX],
    u: &[f64; NU],
    params: &DynamicsParams,
) -> Result<[f64; NX], DynamicsError> {
    let pitch = x[1];
    if pitch.abs() >= std::f64::consts::FRAC_PI_2 - PITCH_GUARD_MARGIN {
        return Err(DynamicsError::GimbalGuard(pitch));
    }
    let view = StateView::from_slice(x);
    let input = InputView::from_slice(u);
    Ok(continuous_dynamics_view(model, filter, &view, &input, params))
}

/// Number of core derivative directions of the vector field:
/// theta(3), omega(3), v(3), q(12), lambda(12), qd(12). The base position
/// does not enter the dynamics and the filter states and auxiliary inputs
/// act only through the linear maps to `lambda` and `qd`.
pub const NDIR: usize = 45;

/// Vector field with exact Jacobians via forward-mode duals on the core
/// directions, expanded through the loopshaping filter maps.
///
/// Returns `(f, A, B)` with `A = df/dx` (48x48) and `B = df/du` (48x24).
pub fn dynamics_with_jacobians(
    model: &QuadrupedModel,
    filter: &LoopshapingFilter,
    x: &[f64; NX],
    u: &[f64; NU],
    params: &DynamicsParams,
) -> Result<([f64; NX], nalgebra::DMatrix<f64>, nalgebra::DMatrix<f64>), DynamicsError> {
    let pitch = x[1];
    if pitch.abs() >= std::f64::consts::FRAC_PI_2 - PITCH_GUARD_MARGIN {
        return Err(DynamicsError::GimbalGuard(pitch));
    }
    let xv = StateView::<f64>::from_slice(x);
    let uv = InputView::<f64>::from_slice(u);
    let lambda_v = contact_forces(filter, &xv.s_lambda, &uv.nu_lambda);
    let qd_v = joint_velocities(filter, &xv.s_j, &uv.nu_j);

    // seed the core directions
    type D = Dual<NDIR>;
    let euler: [D; 3] = core::array::from_fn(|i| Dual::var(xv.euler[i], i));
    let omega: [D; 3] = core::array::from_fn(|i| Dual::var(xv.omega[i], 3 + i));
    let v: [D; 3] = core::array::from_fn(|i| Dual::var(xv.v[i], 6 + i));
    let qj: [D; 12] = core::array::from_fn(|i| Dual::var(xv.qj[i], 9 + i));
    let lambda: [D; 12] = core::array::from_fn(|i| Dual::var(lambda_v[i], 21 + i));
    let qd: [D; 12] = core::array::from_fn(|i| Dual::var(qd_v[i], 33 + i));

    let t_map = euler_rate_map(euler);
    let euler_dot = m3_mul_v3(t_map, omega);
    let r_b = rotation_zyx(euler);
    let p_dot = m3_mul_v3(r_b, v);
    let accel = base_acceleration(
        model,
        &euler,
        &qj,
        &qd,
        omega,
        v,
        &lambda,
        &params.contacts,
        &params.tau_dist,
    )
    .ok_or(DynamicsError::SingularInertia)?;

    let mut value = [0.0; NX];
    for i in 0..3 {
        value[i] = euler_dot[i].v;
        value[3 + i] = p_dot[i].v;
        value[6 + i] = accel[i].v;
        value[9 + i] = accel[3 + i].v;
    }
    for i in 0..12 {
        value[12 + i] = qd_v[i];
        value[24 + i] = u[i];
        value[36 + i] = u[12 + i];
    }

    // expand the 12 differentiated rows into (x, u) columns
    let mut a = nalgebra::DMatrix::<f64>::zeros(NX, NX);
    let mut b = nalgebra::DMatrix::<f64>::zeros(NX, NU);
    let rows: [&D; 12] = [
        &euler_dot[0],
        &euler_dot[1],
        &euler_dot[2],
        &p_dot[0],
        &p_dot[1],
        &p_dot[2],
        &accel[0],
        &accel[1],
        &accel[2],
        &accel[3],
        &accel[4],
        &accel[5],
    ];
    for (i, row) in rows.iter().enumerate() {
        for c in 0..3 {
            a[(i, c)] = row.d[c]; // theta
            a[(i, 6 + c)] = row.d[3 + c]; // omega
            a[(i, 9 + c)] = row.d[6 + c]; // v
        }
        for c in 0..12 {
            a[(i, 12 + c)] = row.d[9 + c]; // q
            // lambda and qd channels through the filter
            a[(i, 24 + c)] = filter.c_lambda * row.d[21 + c];
            a[(i, 36 + c)] = filter.c_j * row.d[33 + c];
            b[(i, c)] = filter.d_lambda * row.d[21 + c];
            b[(i, 12 + c)] = filter.d_j * row.d[33 + c];
        }
    }
    // exact rows: joint kinematics and filter dynamics
    for i in 0..12 {
        a[(12 + i, 36 + i)] = filter.c_j;
        b[(12 + i, 12 + i)] = filter.d_j;
        b[(24 + i, i)] = 1.0;
        b[(36 + i, 12 + i)] = 1.0;
    }
    Ok((value, a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::robot::kinematics::nominal_stance_joints;
    use crate::robot::model::RobotState;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};

    fn model() -> QuadrupedModel {
        QuadrupedModel::default()
    }

    fn stance_state(m: &QuadrupedModel) -> RobotState {
        let mut s = RobotState::default();
        s.set_position([0.0, 0.0, 0.5]);
        s.set_joint_angles(nominal_stance_joints(m, 0.5));
        s
    }

    #[test]
    fn free_fall_acceleration() {
        let m = model();
        let filter = LoopshapingFilter::default();
        let s = stance_state(&m);
        let params = DynamicsParams {
            contacts: [false; 4],
            tau_dist: [0.0; 6],
        };
        let xdot =
            continuous_dynamics(&m, &filter, &s.0, &[0.0; NU], &params).unwrap();
        assert!(xdot[6].abs() < 1e-9 && xdot[7].abs() < 1e-9 && xdot[8].abs() < 1e-9);
        assert!(xdot[9].abs() < 1e-9 && xdot[10].abs() < 1e-9);
        assert!((xdot[11] + 9.81).abs() < 1e-9, "v_dot_z = -g, got {}", xdot[11]);
    }

    #[test]
    fn free_fall_rotated_base() {
        let m = model();
        let filter = LoopshapingFilter::default();
        let mut s = stance_state(&m);
        s.set_euler([0.3, -0.2, 0.9]);
        let params = DynamicsParams {
            contacts: [false; 4],
            tau_dist: [0.0; 6],
        };
        let xdot =
            continuous_dynamics(&m, &filter, &s.0, &[0.0; NU], &params).unwrap();
        let r = rotation_zyx(s.euler());
        let g_b = m3_mul_v3(m3_transpose(r), [0.0, 0.0, -9.81]);
        for i in 0..3 {
            assert!((xdot[9 + i] - g_b[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn hover_under_symmetric_forces() {
        let m = model();
        let filter = LoopshapingFilter::default();
        let s = stance_state(&m);
        let fz = m.total_mass() * m.gravity / 4.0;
        // pick filter states so the output force is exactly (0, 0, fz)
        let mut x = s;
        let mut s_lambda = [0.0; 12];
        for leg in 0..4 {
            s_lambda[3 * leg + 2] = fz / filter.c_lambda;
        }
        x.set_force_filter_states(s_lambda);
        let xdot = continuous_dynamics(
            &m,
            &filter,
            &x.0,
            &[0.0; NU],
            &DynamicsParams::default(),
        )
        .unwrap();
        for i in 6..12 {
            assert!(
                xdot[i].abs() < 1e-6,
                "hover acceleration component {i} = {}",
                xdot[i]
            );
        }
    }

    #[test]
    fn swing_leg_forces_are_ignored() {
        let m = model();
        let filter = LoopshapingFilter::default();
        let mut x = stance_state(&m);
        let mut s_lambda = [0.0; 12];
        s_lambda[2] = 40.0; // LF force, but LF not in contact
        x.set_force_filter_states(s_lambda);
        let params = DynamicsParams {
            contacts: [false, true, true, true],
            tau_dist: [0.0; 6],
        };
        let a = continuous_dynamics(&m, &filter, &x.0, &[0.0; NU], &params).unwrap();
        let mut x2 = x;
        x2.set_force_filter_states([0.0; 12]);
        let b = continuous_dynamics(&m, &filter, &x2.0, &[0.0; NU], &params).unwrap();
        for i in 6..12 {
            assert!((a[i] - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn base_dynamics_affine_in_forces_and_disturbance() {
        let m = model();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let qj = nominal_stance_joints(&m, 0.45);
        let qd: [f64; 12] = core::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let euler = [0.1, -0.05, 0.4];
        let omega = [0.2, -0.1, 0.3];
        let v = [0.5, 0.1, -0.2];
        let eval = |lam: &[f64; 12], dist: &[f64; 6]| -> Vec6<f64> {
            base_acceleration(
                &m,
                &euler,
                &qj,
                &qd,
                omega,
                v,
                lam,
                &[true; 4],
                dist,
            )
            .unwrap()
        };
        let l1: [f64; 12] = core::array::from_fn(|_| rng.random_range(-30.0..30.0));
        let l2: [f64; 12] = core::array::from_fn(|_| rng.random_range(-30.0..30.0));
        let d1: [f64; 6] = core::array::from_fn(|_| rng.random_range(-5.0..5.0));
        let zero_l = [0.0; 12];
        let zero_d = [0.0; 6];
        let base = eval(&zero_l, &zero_d);
        let a = eval(&l1, &zero_d);
        let b = eval(&l2, &zero_d);
        let mut l_sum = [0.0; 12];
        for i in 0..12 {
            l_sum[i] = l1[i] + l2[i];
        }
        let ab = eval(&l_sum, &zero_d);
        for i in 0..6 {
            let superposed = a[i] + b[i] - base[i];
            assert!(
                (ab[i] - superposed).abs() < 1e-10,
                "superposition in lambda failed at {i}"
            );
        }
        let d = eval(&zero_l, &d1);
        let mut d2 = [0.0; 6];
        for i in 0..6 {
            d2[i] = 2.0 * d1[i];
        }
        let dd = eval(&zero_l, &d2);
        for i in 0..6 {
            assert!(
                (dd[i] - (2.0 * d[i] - base[i])).abs() < 1e-10,
                "affinity in disturbance failed at {i}"
            );
        }
    }

    #[test]
    fn composite_inertia_matches_jacobian_assembly_oracle() {
        // Oracle: full mass-matrix base block assembled from per-link com
        // Jacobians and angular Jacobians obtained with dual numbers, at
        // theta = 0 where base and world coordinates coincide.
        let m = model();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        for _ in 0..5 {
            let mut qj = [0.0; 12];
            for q in qj.iter_mut() {
                *q = rng.random_range(-1.2..1.2);
            }
            let m6 = composite_base_inertia::<f64>(&m, &qj);

            let mut oracle = DMatrix::<f64>::zeros(6, 6);
            // torso block
            {
                let mass = m.torso_mass;
                let c = nalgebra::Vector3::from(m.torso_com);
                let jv = nalgebra::Matrix3::new(
                    0.0, c.z, -c.y, //
                    -c.z, 0.0, c.x, //
                    c.y, -c.x, 0.0,
                ); // -S(c) ... d(v_com)/d(omega) = -skew(c) transposed sign checked below
                let jv = -jv.transpose(); // = -S(c)
                let ib = nalgebra::Matrix3::from_diagonal(&nalgebra::Vector3::from(
                    m.torso_inertia,
                ));
                let mut j6v = nalgebra::Matrix3x6::<f64>::zeros();
                j6v.fixed_view_mut::<3, 3>(0, 0).copy_from(&jv);
                j6v.fixed_view_mut::<3, 3>(0, 3)
                    .copy_from(&nalgebra::Matrix3::identity());
                let mut j6w = nalgebra::Matrix3x6::<f64>::zeros();
                j6w.fixed_view_mut::<3, 3>(0, 0)
                    .copy_from(&nalgebra::Matrix3::identity());
                let contribution: nalgebra::Matrix6<f64> =
                    mass * j6v.transpose() * j6v + j6w.transpose() * ib * j6w;
                oracle += contribution;
            }
            for leg in 0..4 {
                let q = [qj[3 * leg], qj[3 * leg + 1], qj[3 * leg + 2]];
                for link in 0..3 {
                    // com position and link rotation via duals over the leg q
                    let qd: [Dual<3>; 3] = core::array::from_fn(|i| Dual::var(q[i], i));
                    let chain = leg_chain(&m, leg, &qd);
                    let (com_d, rot_d) = match link {
                        0 => (chain.hip, chain.r_hip),
                        1 => {
                            let arm = v3_scale(
                                Dual::new(0.5),
                                v3_sub(chain.knee, chain.hip),
                            );
                            (v3_add(chain.hip, arm), chain.r_thigh)
                        }
                        _ => {
                            let arm = v3_scale(
                                Dual::new(0.5),
                                v3_sub(chain.foot, chain.knee),
                            );
                            (v3_add(chain.knee, arm), chain.r_shank)
                        }
                    };
                    let com = nalgebra::Vector3::new(com_d[0].v, com_d[1].v, com_d[2].v);
                    let rot = nalgebra::Matrix3::from_fn(|i, j| rot_d[i][j].v);
                    let mass = m.link_masses[link];
                    let ib = rot
                        * nalgebra::Matrix3::from_diagonal(&nalgebra::Vector3::from(
                            m.link_inertia(link),
                        ))
                        * rot.transpose();
                    // v_com = v + omega x com + J_q qd
                    let mut jv = DMatrix::<f64>::zeros(3, 6 + 3);
                    let s = nalgebra::Matrix3::new(
                        0.0, -com.z, com.y, //
                        com.z, 0.0, -com.x, //
                        -com.y, com.x, 0.0,
                    );
                    jv.view_mut((0, 0), (3, 3)).copy_from(&(-s));
                    jv.view_mut((0, 3), (3, 3))
                        .copy_from(&nalgebra::Matrix3::identity());
                    for k in 0..3 {
                        for i in 0..3 {
                            jv[(i, 6 + k)] = com_d[i].d[k];
                        }
                    }
                    // w = omega + J_w qd, J_w columns from dR/dq R^T
                    let mut jw = DMatrix::<f64>::zeros(3, 6 + 3);
                    jw.view_mut((0, 0), (3, 3))
                        .copy_from(&nalgebra::Matrix3::identity());
                    for k in 0..3 {
                        let dr = nalgebra::Matrix3::from_fn(|i, j| rot_d[i][j].d[k]);
                        let w_hat = dr * rot.transpose();
                        jw[(0, 6 + k)] = w_hat[(2, 1)];
                        jw[(1, 6 + k)] = w_hat[(0, 2)];
                        jw[(2, 6 + k)] = w_hat[(1, 0)];
                    }
                    let m_full = mass * jv.transpose() * &jv + jw.transpose() * ib * jw;
                    oracle += m_full.view((0, 0), (6, 6));
                }
            }
            for i in 0..6 {
                for j in 0..6 {
                    assert!(
                        (m6[i][j] - oracle[(i, j)]).abs() < 1e-10,
                        "M_B[{i}][{j}] = {} vs oracle {}",
                        m6[i][j],
                        oracle[(i, j)]
                    );
                }
            }
        }
    }

    #[test]
    fn zero_input_zero_filter_states_freeze_joints() {
        let m = model();
        let filter = LoopshapingFilter::default();
        let s = stance_state(&m);
        let xdot = continuous_dynamics(
            &m,
            &filter,
            &s.0,
            &[0.0; NU],
            &DynamicsParams {
                contacts: [false; 4],
                tau_dist: [0.0; 6],
            },
        )
        .unwrap();
        for i in 12..24 {
            assert_eq!(xdot[i], 0.0);
        }
        for i in 24..48 {
            assert_eq!(xdot[i], 0.0);
        }
    }

    #[test]
    fn euler_rate_map_identity_at_zero_orientation() {
        let m = model();
        let filter = LoopshapingFilter::default();
        let mut s = stance_state(&m);
        s.set_angular_velocity([0.3, -0.4, 0.5]);
        let xdot = continuous_dynamics(
            &m,
            &filter,
            &s.0,
            &[0.0; NU],
            &DynamicsParams::default(),
        )
        .unwrap();
        assert!((xdot[0] - 0.3).abs() < 1e-14);
        assert!((xdot[1] + 0.4).abs() < 1e-14);
        assert!((xdot[2] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn gimbal_guard_rejects_extreme_pitch() {
        let m = model();
        let filter = LoopshapingFilter::default();
        let mut s = stance_state(&m);
        s.set_euler([0.0, 1.56, 0.0]);
        let r = continuous_dynamics(&m, &filter, &s.0, &[0.0; NU], &DynamicsParams::default());
        assert!(matches!(r, Err(DynamicsError::GimbalGuard(_))));
    }

    #[test]
    fn analytic_jacobians_match_finite_differences() {
        let m = model();
        let filter = LoopshapingFilter::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let params = DynamicsParams {
            contacts: [true, false, true, true],
            tau_dist: [1.0, -2.0, 0.5, 3.0, 0.0, -1.0],
        };
        let mut max_rel: f64 = 0.0;
        for _ in 0..100 {
            let mut x = [0.0; NX];
            x[0] = rng.random_range(-0.3..0.3);
            x[1] = rng.random_range(-0.3..0.3);
            x[2] = rng.random_range(-3.0..3.0);
            for i in 3..6 {
                x[i] = rng.random_range(-1.0..1.0);
            }
            for i in 6..12 {
                x[i] = rng.random_range(-1.5..1.5);
            }
            for i in 12..24 {
                x[i] = rng.random_range(-1.0..1.0);
            }
            for i in 24..48 {
                x[i] = rng.random_range(-2.0..2.0);
            }
            let mut u = [0.0; NU];
            for i in 0..NU {
                u[i] = rng.random_range(-2.0..2.0);
            }
            let (_, a_mat, b_mat) = dynamics_with_jacobians(&m, &filter, &x, &u, &params).unwrap();
            // probe a few random directions per point
            for _ in 0..3 {
                let dir_x: [f64; NX] = core::array::from_fn(|_| rng.random_range(-1.0..1.0));
                let dir_u: [f64; NU] = core::array::from_fn(|_| rng.random_range(-1.0..1.0));
                let h = 1e-6;
                let mut xp = x;
                let mut xm = x;
                let mut up = u;
                let mut um = u;
                for i in 0..NX {
                    xp[i] += h * dir_x[i];
                    xm[i] -= h * dir_x[i];
                }
                for i in 0..NU {
                    up[i] += h * dir_u[i];
                    um[i] -= h * dir_u[i];
                }
                let fp = continuous_dynamics(&m, &filter, &xp, &up, &params).unwrap();
                let fm = continuous_dynamics(&m, &filter, &xm, &um, &params).unwrap();
                let scale: f64 = {
                    let fx = DVector::from_row_slice(&fp);
                    fx.amax().max(1.0)
                };
                for i in 0..NX {
                    let fd = (fp[i] - fm[i]) / (2.0 * h);
                    let analytic: f64 = (0..NX)
                        .map(|k| a_mat[(i, k)] * dir_x[k])
                        .chain((0..NU).map(|k| b_mat[(i, k)] * dir_u[k]))
                        .sum();
                    let rel = (fd - analytic).abs() / scale.max(analytic.abs());
                    max_rel = max_rel.max(rel);
                    assert!(
                        rel <= 1e-5,
                        "row {i}: fd {fd} vs analytic {analytic} (rel {rel})"
                    );
                }
            }
        }
    }
}
