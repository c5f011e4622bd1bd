//! Leg kinematics: forward chains, Jacobians, and analytic inverse
//! kinematics.
//!
//! Each leg is a 3-DOF chain: HAA about the base x-axis at the hip point,
//! then HFE and KFE about the (rotated) y-axis. At zero joint angles the leg
//! is stretched straight down.

use crate::math::{
    m3_mul, m3_mul_v3, m3_tr_mul_v3, rotation_zyx, rx, ry, v3_add, v3_cross, v3_scale, v3_sub,
    Mat3, Real, Vec3,
};
use crate::robot::model::{QuadrupedModel, RobotState, StateView, NUM_LEGS};

/// Per-leg chain evaluated in the base frame.
pub struct LegChain<R: Real> {
    pub hip: Vec3<R>,
    pub knee: Vec3<R>,
    pub foot: Vec3<R>,
    /// Rotation of the hip link (after HAA).
    pub r_hip: Mat3<R>,
    /// Rotation of the thigh link (after HFE).
    pub r_thigh: Mat3<R>,
    /// Rotation of the shank link (after KFE).
    pub r_shank: Mat3<R>,
}

pub fn leg_chain<R: Real>(model: &QuadrupedModel, leg: usize, q: &[R; 3]) -> LegChain<R> {
    let hip = [
        R::constant(model.hip_offsets[leg][0]),
        R::constant(model.hip_offsets[leg][1]),
        R::constant(model.hip_offsets[leg][2]),
    ];
    let r_hip = rx(q[0]);
    let r_thigh = m3_mul(r_hip, ry(q[1]));
    let r_shank = m3_mul(r_hip, ry(q[1] + q[2]));
    let down_thigh = [R::zero(), R::zero(), R::constant(-model.thigh_length)];
    let down_shank = [R::zero(), R::zero(), R::constant(-model.shank_length)];
    let knee = v3_add(hip, m3_mul_v3(r_thigh, down_thigh));
    let foot = v3_add(knee, m3_mul_v3(r_shank, down_shank));
    LegChain {
        hip,
        knee,
        foot,
        r_hip,
        r_thigh,
        r_shank,
    }
}

/// World positions of feet, knee collision centers, and hips.
pub struct BodyPoints {
    pub feet: [[f64; 3]; NUM_LEGS],
    pub knees: [[f64; 3]; NUM_LEGS],
    pub hips: [[f64; 3]; NUM_LEGS],
}

pub fn forward_kinematics(model: &QuadrupedModel, state: &RobotState) -> BodyPoints {
    let view = StateView::<f64>::from_slice(&state.0);
    forward_kinematics_view(model, &view)
}

pub fn forward_kinematics_view(model: &QuadrupedModel, view: &StateView<f64>) -> BodyPoints {
    let r = rotation_zyx(view.euler);
    let mut points = BodyPoints {
        feet: [[0.0; 3]; NUM_LEGS],
        knees: [[0.0; 3]; NUM_LEGS],
        hips: [[0.0; 3]; NUM_LEGS],
    };
    for leg in 0..NUM_LEGS {
        let chain = leg_chain(model, leg, &view.leg_joints(leg));
        points.feet[leg] = v3_add(view.p, m3_mul_v3(r, chain.foot));
        points.knees[leg] = v3_add(view.p, m3_mul_v3(r, chain.knee));
        points.hips[leg] = v3_add(view.p, m3_mul_v3(r, chain.hip));
    }
    points
}

/// Foot position in the world frame, scalar-generic.
pub fn foot_position_world<R: Real>(
    model: &QuadrupedModel,
    euler: &Vec3<R>,
    p: &Vec3<R>,
    q_leg: &[R; 3],
    leg: usize,
) -> Vec3<R> {
    let r = rotation_zyx(*euler);
    let chain = leg_chain(model, leg, q_leg);
    v3_add(*p, m3_mul_v3(r, chain.foot))
}

/// Base-frame 3x3 joint Jacobian of a point on the leg.
///
/// Columns are `axis x (point - joint_origin)`; HAA turns about the base
/// x-axis at the hip, HFE and KFE share the hip-rolled y-axis.
pub fn leg_point_jacobian<R: Real>(
    model: &QuadrupedModel,
    leg: usize,
    q: &[R; 3],
    point_on_shank: bool,
) -> ([[R; 3]; 3], LegChain<R>) {
    let chain = leg_chain(model, leg, q);
    let target = if point_on_shank { chain.foot } else { chain.knee };
    let ax_haa = [R::one(), R::zero(), R::zero()];
    let ax_y = m3_mul_v3(chain.r_hip, [R::zero(), R::one(), R::zero()]);
    let c1 = v3_cross(ax_haa, v3_sub(target, chain.hip));
    let c2 = v3_cross(ax_y, v3_sub(target, chain.hip));
    let c3 = if point_on_shank {
        v3_cross(ax_y, v3_sub(target, chain.knee))
    } else {
        [R::zero(); 3]
    };
    // columns stored as rows of the transposed matrix for cheap access
    let jac = [
        [c1[0], c2[0], c3[0]],
        [c1[1], c2[1], c3[1]],
        [c1[2], c2[2], c3[2]],
    ];
    (jac, chain)
}

/// World-frame foot velocity given the full generalized velocity.
pub fn foot_velocity_world<R: Real>(
    model: &QuadrupedModel,
    view: &StateView<R>,
    qd_leg: &[R; 3],
    leg: usize,
) -> Vec3<R> {
    let r = rotation_zyx(view.euler);
    let (jac, chain) = leg_point_jacobian(model, leg, &view.leg_joints(leg), true);
    let joint_part = m3_mul_v3(jac, *qd_leg);
    let body = v3_add(
        view.v,
        v3_add(v3_cross(view.omega, chain.foot), joint_part),
    );
    m3_mul_v3(r, body)
}

/// Full 3x18 world-frame foot Jacobian mapping
/// `[omega_B, v_B, qd_j]` (body rates) to the world foot velocity.
pub fn foot_jacobian(model: &QuadrupedModel, state: &RobotState, leg: usize) -> [[f64; 18]; 3] {
    let view = StateView::<f64>::from_slice(&state.0);
    let r = rotation_zyx(view.euler);
    let (jac, chain) = leg_point_jacobian(model, leg, &view.leg_joints(leg), true);
    let mut out = [[0.0; 18]; 3];
    // omega columns: R * (-skew(foot_b)) = R * (foot_b x .)^T ... column k is
    // R * (e_k x foot_b) negated, i.e. R * (foot_b x e_k)
    for k in 0..3 {
        let mut e = [0.0; 3];
        e[k] = 1.0;
        // column k of -R S(foot_b): R (e_k x foot_b)
        let col = m3_mul_v3(r, v3_cross(e, chain.foot));
        for i in 0..3 {
            out[i][k] = col[i];
        }
        let vcol = [r[0][k], r[1][k], r[2][k]];
        for i in 0..3 {
            out[i][3 + k] = vcol[i];
        }
        let jcol = m3_mul_v3(r, [jac[0][k], jac[1][k], jac[2][k]]);
        for i in 0..3 {
            out[i][6 + 3 * leg + k] = jcol[i];
        }
    }
    out
}

/// Analytic inverse kinematics for one leg.
///
/// `target` is the desired foot position in the base frame. Unreachable
/// targets are clamped to the nearest reachable point and flagged. The knee
/// bend follows the per-leg convention; `FK(IK(p)) = p` for reachable points.
pub fn inverse_kinematics(
    model: &QuadrupedModel,
    leg: usize,
    target: &[f64; 3],
) -> ([f64; 3], bool) {
    let hip = model.hip_offsets[leg];
    let f = v3_sub(*target, hip);
    let q1 = f[1].atan2(-f[2]);
    // rotate into the leg plane: f2 = Rx(-q1) f has zero y-component
    let f2 = m3_tr_mul_v3(rx(q1), f);
    let (l1, l2) = (model.thigh_length, model.shank_length);
    let d_raw = (f2[0] * f2[0] + f2[2] * f2[2]).sqrt();
    let d_min = (l1 - l2).abs() + 1e-9;
    let d = d_raw.clamp(d_min, l1 + l2);
    let clamped = (d_raw - d).abs() > 1e-12;
    let cos_gamma = ((l1 * l1 + l2 * l2 - d * d) / (2.0 * l1 * l2)).clamp(-1.0, 1.0);
    let gamma = cos_gamma.acos();
    let sign = model.knee_sign(leg);
    let q3 = sign * (std::f64::consts::PI - gamma);
    // positive HFE swings the leg backward (foot x = -l sin(q2) in the leg
    // plane), so the target angle is measured from -z toward -x
    let theta_target = (-f2[0]).atan2(-f2[2]);
    let q2 = theta_target - (l2 * q3.sin()).atan2(l1 + l2 * q3.cos());
    // reachability includes the joint boxes: clamp so references never ask
    // the tracking cost to fight the limit barriers
    let mut q = [q1, q2, q3];
    let mut clamped = clamped;
    for (i, qi) in q.iter_mut().enumerate() {
        let lo = model.q_lower[i];
        let hi = model.q_upper[i];
        let c = qi.clamp(lo, hi);
        if (c - *qi).abs() > 1e-12 {
            clamped = true;
        }
        *qi = c;
    }
    (q, clamped)
}

/// Joint angles with every foot directly below its hip at `stance_depth`.
pub fn nominal_stance_joints(model: &QuadrupedModel, stance_depth: f64) -> [f64; 12] {
    let mut q = [0.0; 12];
    for leg in 0..NUM_LEGS {
        let hip = model.hip_offsets[leg];
        let target = [hip[0], hip[1], hip[2] - stance_depth];
        let (qi, clamped) = inverse_kinematics(model, leg, &target);
        debug_assert!(!clamped);
        q[3 * leg..3 * leg + 3].copy_from_slice(&qi);
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{v3_dot, v3_norm};
    use crate::robot::model::{LoopshapingFilter, NUM_JOINTS};
    use rand::{Rng, SeedableRng};

    fn model() -> QuadrupedModel {
        QuadrupedModel::default()
    }

    fn random_state(rng: &mut impl Rng) -> RobotState {
        let mut s = RobotState::default();
        s.set_euler([
            rng.random_range(-0.4..0.4),
            rng.random_range(-0.4..0.4),
            rng.random_range(-3.0..3.0),
        ]);
        s.set_position([
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(0.3..0.7),
        ]);
        s.set_angular_velocity([
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ]);
        s.set_linear_velocity([
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ]);
        let mut q = [0.0; NUM_JOINTS];
        for leg in 0..4 {
            q[3 * leg] = rng.random_range(-0.5..0.5);
            q[3 * leg + 1] = rng.random_range(-1.0..1.0);
            q[3 * leg + 2] = model().knee_sign(leg) * rng.random_range(0.3..1.8);
        }
        s.set_joint_angles(q);
        s
    }

    #[test]
    fn zero_joints_stretch_leg_down() {
        let m = model();
        let mut s = RobotState::default();
        s.set_position([0.0, 0.0, 0.0]);
        let pts = forward_kinematics(&m, &s);
        for leg in 0..4 {
            let hip = m.hip_offsets[leg];
            let expect = [hip[0], hip[1], hip[2] - 0.6];
            assert!(v3_norm(v3_sub(pts.feet[leg], expect)) < 1e-12);
        }
    }

    #[test]
    fn translation_equivariance() {
        let m = model();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let s = random_state(&mut rng);
        let mut s2 = s;
        let p = s.position();
        s2.set_position([p[0] + 1.0, p[1] + 2.0, p[2] + 3.0]);
        let a = forward_kinematics(&m, &s);
        let b = forward_kinematics(&m, &s2);
        for leg in 0..4 {
            let d = v3_sub(b.feet[leg], a.feet[leg]);
            assert!(v3_norm(v3_sub(d, [1.0, 2.0, 3.0])) < 1e-12);
        }
    }

    #[test]
    fn yaw_rotation_equivariance() {
        let m = model();
        let mut s = RobotState::default();
        s.set_position([0.0, 0.0, 0.5]);
        let mut s2 = s;
        s2.set_euler([0.0, 0.0, std::f64::consts::FRAC_PI_2]);
        let a = forward_kinematics(&m, &s);
        let b = forward_kinematics(&m, &s2);
        for leg in 0..4 {
            // 90 degree yaw: (x, y) -> (-y, x)
            let expect = [-a.feet[leg][1], a.feet[leg][0], a.feet[leg][2]];
            assert!(v3_norm(v3_sub(b.feet[leg], expect)) < 1e-12);
        }
    }

    #[test]
    fn foot_jacobian_matches_directional_finite_differences() {
        let m = model();
        let filter = LoopshapingFilter::default();
        let _ = filter;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let s = random_state(&mut rng);
            // random generalized velocity direction
            let qd: [f64; 18] = core::array::from_fn(|_| rng.random_range(-1.0..1.0));
            for leg in 0..4 {
                let j = foot_jacobian(&m, &s, leg);
                let mut predicted = [0.0; 3];
                for i in 0..3 {
                    predicted[i] = (0..18).map(|k| j[i][k] * qd[k]).sum();
                }
                // integrate the state along the velocity for a small step
                let h = 1e-6;
                let step = |dir: f64| {
                    let mut s2 = s;
                    let view = StateView::<f64>::from_slice(&s.0);
                    let r = rotation_zyx(view.euler);
                    let t = crate::math::euler_rate_map(view.euler);
                    let omega = [qd[0], qd[1], qd[2]];
                    let vb = [qd[3], qd[4], qd[5]];
                    let de = m3_mul_v3(t, omega);
                    let dp = m3_mul_v3(r, vb);
                    s2.set_euler([
                        view.euler[0] + dir * h * de[0],
                        view.euler[1] + dir * h * de[1],
                        view.euler[2] + dir * h * de[2],
                    ]);
                    s2.set_position([
                        view.p[0] + dir * h * dp[0],
                        view.p[1] + dir * h * dp[1],
                        view.p[2] + dir * h * dp[2],
                    ]);
                    let mut q = s.joint_angles();
                    for k in 0..12 {
                        q[k] += dir * h * qd[6 + k];
                    }
                    s2.set_joint_angles(q);
                    forward_kinematics(&m, &s2).feet[leg]
                };
                let plus = step(1.0);
                let minus = step(-1.0);
                for i in 0..3 {
                    let fd = (plus[i] - minus[i]) / (2.0 * h);
                    assert!(
                        (fd - predicted[i]).abs() <= 1e-6 * (1.0 + predicted[i].abs()),
                        "leg {leg} axis {i}: fd {fd} vs {p}",
                        p = predicted[i]
                    );
                }
            }
        }
    }

    #[test]
    fn kfe_motion_moves_foot_orthogonal_to_shank() {
        let m = model();
        let mut s = RobotState::default();
        let mut q = [0.0; NUM_JOINTS];
        q[1] = 0.4;
        q[2] = -0.9;
        s.set_joint_angles(q);
        let j = foot_jacobian(&m, &s, 0);
        let kfe_col = [j[0][8], j[1][8], j[2][8]];
        // shank axis in world (identity base)
        let chain = leg_chain(&m, 0, &[q[0], q[1], q[2]]);
        let shank = v3_sub(chain.foot, chain.knee);
        assert!(v3_dot(kfe_col, shank).abs() < 1e-12);
        // columns of other legs are zero
        for c in 9..12 {
            for r in 0..3 {
                assert_eq!(j[r][c + 3], 0.0);
            }
        }
    }

    #[test]
    fn ik_straight_down_target() {
        let m = model();
        for leg in 0..4 {
            let hip = m.hip_offsets[leg];
            let target = [hip[0], hip[1], hip[2] - 0.42];
            let (q, clamped) = inverse_kinematics(&m, leg, &target);
            assert!(!clamped);
            assert!(q[0].abs() < 1e-12, "HAA must be zero");
            // two-link closed form oracle: d = 0.42, l1 = l2 = 0.3
            let cos_g = (0.09 + 0.09 - 0.42f64 * 0.42) / (2.0 * 0.09);
            let gamma = cos_g.acos();
            let expect_q3 = m.knee_sign(leg) * (std::f64::consts::PI - gamma);
            assert!((q[2] - expect_q3).abs() < 1e-12);
            // target angle is zero, so q2 compensates the knee bend
            let expect_q2 =
                -(0.3 * expect_q3.sin()).atan2(0.3 + 0.3 * expect_q3.cos());
            assert!((q[1] - expect_q2).abs() < 1e-12);
        }
    }

    #[test]
    fn ik_full_stretch_gives_zero_knee() {
        let m = model();
        let hip = m.hip_offsets[1];
        let target = [hip[0], hip[1], hip[2] - 0.6];
        let (q, _) = inverse_kinematics(&m, 1, &target);
        assert!(q[2].abs() < 1e-6, "straight leg must have KFE = 0");
    }

    #[test]
    fn fk_ik_round_trip() {
        let m = model();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut checked = 0;
        while checked < 1000 {
            let leg = rng.random_range(0..4);
            let hip = m.hip_offsets[leg];
            // sample reachable targets below the hip
            let r = rng.random_range(0.22..0.58);
            let az = rng.random_range(-1.2..1.2);
            let el = rng.random_range(-0.9..0.9);
            let target = [
                hip[0] + r * az.sin() * el.cos(),
                hip[1] + r * el.sin(),
                hip[2] - r * az.cos() * el.cos(),
            ];
            let (q, clamped) = inverse_kinematics(&m, leg, &target);
            if clamped {
                continue;
            }
            let chain = leg_chain(&m, leg, &q);
            let err = v3_norm(v3_sub(chain.foot, target));
            assert!(err <= 1e-9, "round trip error {err} on leg {leg}");
            checked += 1;
        }
    }

    #[test]
    fn ik_clamps_unreachable_target() {
        let m = model();
        let hip = m.hip_offsets[0];
        let target = [hip[0], hip[1], hip[2] - 1.0];
        let (q, clamped) = inverse_kinematics(&m, 0, &target);
        assert!(clamped);
        let chain = leg_chain(&m, 0, &q);
        let d = v3_norm(v3_sub(chain.foot, [hip[0], hip[1], hip[2]]));
        assert!((d - 0.6).abs() < 1e-9, "clamped to full extension");
    }

    #[test]
    fn nominal_stance_feet_under_hips() {
        let m = model();
        let q = nominal_stance_joints(&m, 0.5);
        for leg in 0..4 {
            let chain = leg_chain(&m, leg, &[q[3 * leg], q[3 * leg + 1], q[3 * leg + 2]]);
            let hip = m.hip_offsets[leg];
            assert!(v3_norm(v3_sub(chain.foot, [hip[0], hip[1], hip[2] - 0.5])) < 1e-9);
            // front knees behind the hip, hind knees in front
            let knee_dx = chain.knee[0] - hip[0];
            if leg < 2 {
                assert!(knee_dx < 0.0, "front knee must point backward");
            } else {
                assert!(knee_dx > 0.0, "hind knee must point forward");
            }
        }
    }
}
