//! Rotation parameterizations: ZYX Euler angles and the SO(3) log map.

use super::linear::{m3_mul, m3_zero, Mat3, Vec3};
use super::Real;

/// Euler angles stored as (roll, pitch, yaw); the rotation matrix is
/// `Rz(yaw) * Ry(pitch) * Rx(roll)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EulerZyx {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

pub fn rx<R: Real>(a: R) -> Mat3<R> {
    let (s, c) = (a.sin(), a.cos());
    let mut m = m3_zero();
    m[0][0] = R::one();
    m[1][1] = c;
    m[1][2] = -s;
    m[2][1] = s;
    m[2][2] = c;
    m
}

pub fn ry<R: Real>(a: R) -> Mat3<R> {
    let (s, c) = (a.sin(), a.cos());
    let mut m = m3_zero();
    m[0][0] = c;
    m[0][2] = s;
    m[1][1] = R::one();
    m[2][0] = -s;
    m[2][2] = c;
    m
}

pub fn rz<R: Real>(a: R) -> Mat3<R> {
    let (s, c) = (a.sin(), a.cos());
    let mut m = m3_zero();
    m[0][0] = c;
    m[0][1] = -s;
    m[1][0] = s;
    m[1][1] = c;
    m[2][2] = R::one();
    m
}

/// Body-to-world rotation from (roll, pitch, yaw).
pub fn rotation_zyx<R: Real>(euler: Vec3<R>) -> Mat3<R> {
    m3_mul(rz(euler[2]), m3_mul(ry(euler[1]), rx(euler[0])))
}

pub fn skew<R: Real>(v: Vec3<R>) -> Mat3<R> {
    let z = R::zero();
    [
        [z, -v[2], v[1]],
        [v[2], z, -v[0]],
        [-v[1], v[0], z],
    ]
}

/// Map from body angular rates to ZYX Euler angle rates.
///
/// With `euler = (roll, pitch, yaw)` and body rates `w`:
/// `d(euler)/dt = T(euler) * w`. `T(0) = I`. The map is singular at
/// `|pitch| = pi/2`; callers guard the pitch range.
pub fn euler_rate_map<R: Real>(euler: Vec3<R>) -> Mat3<R> {
    let (sr, cr) = (euler[0].sin(), euler[0].cos());
    let (cp, tp) = (euler[1].cos(), euler[1].tan());
    let z = R::zero();
    [
        [R::one(), sr * tp, cr * tp],
        [z, cr, -sr],
        [z, sr / cp, cr / cp],
    ]
}

/// Rotation-vector logarithm of a rotation matrix.
///
/// Returns `theta * axis`. Accurate for small angles via a series expansion
/// of `theta / (2 sin theta)`; branch decisions use value parts only so the
/// function stays differentiable under dual numbers away from `theta = pi`.
pub fn rotation_log<R: Real>(m: Mat3<R>) -> Vec3<R> {
    let trace = m[0][0] + m[1][1] + m[2][2];
    // clamp trace to the valid range to survive rounding
    let cos_theta_val = ((trace.val() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let vee = [
        m[2][1] - m[1][2],
        m[0][2] - m[2][0],
        m[1][0] - m[0][1],
    ];
    if cos_theta_val > 1.0 - 1e-9 {
        // theta ~ 0: log(R) ~ 0.5 * vee * (1 + theta^2/12)
        let half = R::constant(0.5);
        let theta2 = {
            let c = (trace - R::one()) * half;
            // theta^2 ~ 2(1 - cos) for small theta
            (R::one() - c) * R::constant(2.0)
        };
        let scale = half * (R::one() + theta2 / R::constant(12.0));
        [scale * vee[0], scale * vee[1], scale * vee[2]]
    } else if cos_theta_val < -1.0 + 1e-7 {
        // theta ~ pi: extract axis from the symmetric part. Not reached by the
        // tracking cost (reference errors stay far from pi); value-only path.
        let theta = R::constant(cos_theta_val.acos());
        let axis_sq = [
            (m[0][0] - R::constant(cos_theta_val)) / R::constant(1.0 - cos_theta_val),
            (m[1][1] - R::constant(cos_theta_val)) / R::constant(1.0 - cos_theta_val),
            (m[2][2] - R::constant(cos_theta_val)) / R::constant(1.0 - cos_theta_val),
        ];
        let mut axis = [
            axis_sq[0].val().max(0.0).sqrt(),
            axis_sq[1].val().max(0.0).sqrt(),
            axis_sq[2].val().max(0.0).sqrt(),
        ];
        // fix signs from the off-diagonal skew part
        if vee[0].val() < 0.0 {
            axis[0] = -axis[0];
        }
        if vee[1].val() < 0.0 {
            axis[1] = -axis[1];
        }
        if vee[2].val() < 0.0 {
            axis[2] = -axis[2];
        }
        [
            theta * R::constant(axis[0]),
            theta * R::constant(axis[1]),
            theta * R::constant(axis[2]),
        ]
    } else {
        let cos_theta = (trace - R::one()) * R::constant(0.5);
        let theta = R::constant(cos_theta_val.acos());
        // recompute theta differentiably: theta = atan2(sin, cos)
        let sin_theta = (R::one() - cos_theta * cos_theta).sqrt();
        let theta = if sin_theta.val() > 1e-12 {
            sin_theta.atan2(cos_theta)
        } else {
            theta
        };
        let scale = theta / (R::constant(2.0) * sin_theta);
        [scale * vee[0], scale * vee[1], scale * vee[2]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::linear::{m3_mul_v3, m3_transpose, v3_norm, v3_sub};

    #[test]
    fn euler_rate_map_is_identity_at_zero() {
        let t = euler_rate_map([0.0f64; 3]);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((t[i][j] - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn euler_rate_map_inverts_body_rate_composition() {
        // Rdot = R * skew(w) must match the numerical derivative of
        // R(euler + T(euler) w * h).
        let euler = [0.3, -0.4, 1.1];
        let w = [0.7, -0.2, 0.5];
        let h = 1e-7;
        let t = euler_rate_map(euler);
        let de = m3_mul_v3(t, w);
        let euler2 = [
            euler[0] + de[0] * h,
            euler[1] + de[1] * h,
            euler[2] + de[2] * h,
        ];
        let r1 = rotation_zyx(euler);
        let r2 = rotation_zyx(euler2);
        // w_hat = R1^T (R2 - R1) / h
        for (i, j, expect) in [(2, 1, w[0]), (0, 2, w[1]), (1, 0, w[2])] {
            let mut acc = 0.0;
            for k in 0..3 {
                acc += r1[k][i] * (r2[k][j] - r1[k][j]) / h;
            }
            assert!((acc - expect).abs() < 1e-5, "{acc} vs {expect}");
        }
    }

    #[test]
    fn log_of_rotation_recovers_rotation_vector() {
        for (angle, axis) in [
            (0.8, [1.0, 0.0, 0.0]),
            (1.9, [0.0, 0.6, 0.8]),
            (1e-6, [0.0, 0.0, 1.0]),
        ] {
            let n = v3_norm(axis);
            let unit = [axis[0] / n, axis[1] / n, axis[2] / n];
            // Rodrigues
            let k = skew(unit);
            let mut r = [[0.0f64; 3]; 3];
            let k2 = m3_mul(k, k);
            for i in 0..3 {
                for j in 0..3 {
                    let eye = if i == j { 1.0 } else { 0.0 };
                    r[i][j] = eye + angle.sin() * k[i][j] + (1.0 - angle.cos()) * k2[i][j];
                }
            }
            let log = rotation_log(r);
            let expect = [unit[0] * angle, unit[1] * angle, unit[2] * angle];
            assert!(v3_norm(v3_sub(log, expect)) < 1e-9 * (1.0 + angle));
        }
    }

    #[test]
    fn log_is_zero_for_identity() {
        let r = rotation_zyx([0.0f64; 3]);
        let l = rotation_log(r);
        assert!(v3_norm(l) < 1e-15);
    }

    #[test]
    fn transpose_gives_inverse_rotation() {
        let r = rotation_zyx([0.2, 0.5, -0.7]);
        let rt = m3_transpose(r);
        let eye = m3_mul(r, rt);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((eye[i][j] - expect).abs() < 1e-14);
            }
        }
    }
}
