//! Quintic splines for swing foot trajectories.

use nalgebra::Vector3;

/// Quintic polynomial segment `p(tau)`, one coefficient row per axis, with
/// `tau = (t - t0) / (t1 - t0)`.
#[derive(Clone, Debug)]
pub struct QuinticSegment {
    pub t0: f64,
    pub t1: f64,
    coeffs: [[f64; 6]; 3],
}

impl QuinticSegment {
    /// Fit position, velocity, and acceleration at both ends.
    pub fn fit(
        t0: f64,
        t1: f64,
        p0: Vector3<f64>,
        v0: Vector3<f64>,
        a0: Vector3<f64>,
        p1: Vector3<f64>,
        v1: Vector3<f64>,
        a1: Vector3<f64>,
    ) -> Self {
        let h = t1 - t0;
        assert!(h > 0.0, "segment duration must be positive");
        let mut coeffs = [[0.0; 6]; 3];
        for axis in 0..3 {
            // boundary data scaled to normalized time
            let (p0, p1) = (p0[axis], p1[axis]);
            let (v0, v1) = (v0[axis] * h, v1[axis] * h);
            let (a0, a1) = (a0[axis] * h * h, a1[axis] * h * h);
            let c0 = p0;
            let c1 = v0;
            let c2 = 0.5 * a0;
            let c3 = 10.0 * (p1 - p0) - 6.0 * v0 - 4.0 * v1 - 1.5 * a0 + 0.5 * a1;
            let c4 = -15.0 * (p1 - p0) + 8.0 * v0 + 7.0 * v1 + 1.5 * a0 - a1;
            let c5 = 6.0 * (p1 - p0) - 3.0 * (v0 + v1) - 0.5 * (a0 - a1);
            coeffs[axis] = [c0, c1, c2, c3, c4, c5];
        }
        Self { t0, t1, coeffs }
    }

    pub fn position(&self, t: f64) -> Vector3<f64> {
        let tau = ((t - self.t0) / (self.t1 - self.t0)).clamp(0.0, 1.0);
        Vector3::from_fn(|axis, _| {
            let c = &self.coeffs[axis];
            ((((c[5] * tau + c[4]) * tau + c[3]) * tau + c[2]) * tau + c[1]) * tau + c[0]
        })
    }

    pub fn velocity(&self, t: f64) -> Vector3<f64> {
        let h = self.t1 - self.t0;
        let tau = ((t - self.t0) / h).clamp(0.0, 1.0);
        Vector3::from_fn(|axis, _| {
            let c = &self.coeffs[axis];
            ((((5.0 * c[5] * tau + 4.0 * c[4]) * tau + 3.0 * c[3]) * tau + 2.0 * c[2]) * tau
                + c[1])
                / h
        })
    }

    pub fn acceleration(&self, t: f64) -> Vector3<f64> {
        let h = self.t1 - self.t0;
        let tau = ((t - self.t0) / h).clamp(0.0, 1.0);
        Vector3::from_fn(|axis, _| {
            let c = &self.coeffs[axis];
            (((20.0 * c[5] * tau + 12.0 * c[4]) * tau + 6.0 * c[3]) * tau + 2.0 * c[2]) / (h * h)
        })
    }
}

/// Swing trajectory: two quintic segments joined at the apex, plus the
/// interpolated surface normal between liftoff and touchdown terrain.
#[derive(Clone, Debug)]
pub struct SwingSpline {
    pub rise: QuinticSegment,
    pub fall: QuinticSegment,
    pub normal_start: Vector3<f64>,
    pub normal_end: Vector3<f64>,
}

impl SwingSpline {
    pub fn start_time(&self) -> f64 {
        self.rise.t0
    }
    pub fn end_time(&self) -> f64 {
        self.fall.t1
    }

    pub fn position(&self, t: f64) -> Vector3<f64> {
        if t < self.rise.t1 {
            self.rise.position(t)
        } else {
            self.fall.position(t)
        }
    }

    pub fn velocity(&self, t: f64) -> Vector3<f64> {
        if t < self.rise.t1 {
            self.rise.velocity(t)
        } else {
            self.fall.velocity(t)
        }
    }

    /// Linear interpolation of liftoff and touchdown normals, renormalized.
    pub fn normal(&self, t: f64) -> Vector3<f64> {
        let s = ((t - self.start_time()) / (self.end_time() - self.start_time())).clamp(0.0, 1.0);
        let n = self.normal_start * (1.0 - s) + self.normal_end * s;
        let norm = n.norm();
        if norm > 1e-12 {
            n / norm
        } else {
            Vector3::z()
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SplineError {
    #[error("degenerate swing phase: start {0} >= end {1}")]
    DegenerateSwing(f64, f64),
}

/// Build the two-segment swing spline.
///
/// The apex sits at the phase midpoint; its height must clear
/// `max_terrain_height` by `clearance`. Boundary velocities point along the
/// respective plane normals with the configured signed speeds.
#[allow(clippy::too_many_arguments)]
pub fn swing_trajectory(
    liftoff: Vector3<f64>,
    touchdown: Vector3<f64>,
    normal_liftoff: Vector3<f64>,
    normal_touchdown: Vector3<f64>,
    t_start: f64,
    t_end: f64,
    liftoff_speed: f64,
    touchdown_speed: f64,
    max_terrain_height: f64,
    clearance: f64,
) -> Result<SwingSpline, SplineError> {
    if t_end - t_start <= 1e-9 {
        return Err(SplineError::DegenerateSwing(t_start, t_end));
    }
    let t_apex = 0.5 * (t_start + t_end);
    let apex_z = max_terrain_height.max(liftoff.z).max(touchdown.z) + clearance;
    let apex = Vector3::new(
        0.5 * (liftoff.x + touchdown.x),
        0.5 * (liftoff.y + touchdown.y),
        apex_z,
    );
    let duration = t_end - t_start;
    let mut apex_vel = (touchdown - liftoff) / duration;
    apex_vel.z = 0.0;
    let v0 = normal_liftoff * liftoff_speed;
    let v1 = normal_touchdown * touchdown_speed;
    let zero = Vector3::zeros();
    let rise = QuinticSegment::fit(t_start, t_apex, liftoff, v0, zero, apex, apex_vel, zero);
    let fall = QuinticSegment::fit(t_apex, t_end, apex, apex_vel, zero, touchdown, v1, zero);
    Ok(SwingSpline {
        rise,
        fall,
        normal_start: normal_liftoff,
        normal_end: normal_touchdown,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn quintic_matches_boundary_conditions() {
        let p0 = Vector3::new(0.1, -0.2, 0.0);
        let v0 = Vector3::new(0.0, 0.0, 0.3);
        let a0 = Vector3::new(0.5, 0.0, 0.0);
        let p1 = Vector3::new(0.4, 0.1, 0.2);
        let v1 = Vector3::new(0.0, 0.0, -0.3);
        let a1 = Vector3::new(0.0, 0.2, 0.0);
        let s = QuinticSegment::fit(1.0, 1.6, p0, v0, a0, p1, v1, a1);
        assert_relative_eq!((s.position(1.0) - p0).norm(), 0.0, epsilon = 1e-12);
        assert_relative_eq!((s.position(1.6) - p1).norm(), 0.0, epsilon = 1e-10);
        assert_relative_eq!((s.velocity(1.0) - v0).norm(), 0.0, epsilon = 1e-10);
        assert_relative_eq!((s.velocity(1.6) - v1).norm(), 0.0, epsilon = 1e-9);
        assert_relative_eq!((s.acceleration(1.0) - a0).norm(), 0.0, epsilon = 1e-9);
        assert_relative_eq!((s.acceleration(1.6) - a1).norm(), 0.0, epsilon = 1e-8);
    }

    #[test]
    fn flat_swing_is_symmetric_with_apex_clearance() {
        let p = Vector3::new(0.2, 0.1, 0.0);
        let q = Vector3::new(0.5, 0.1, 0.0);
        let z = Vector3::z();
        let s = swing_trajectory(p, q, z, z, 0.0, 0.4, 0.3, -0.3, 0.0, 0.08).unwrap();
        let apex = s.position(0.2);
        assert_relative_eq!(apex.z, 0.08, epsilon = 1e-12);
        assert_relative_eq!(apex.x, 0.35, epsilon = 1e-12);
        // symmetry: z profile mirrors around the apex
        for k in 0..10 {
            let dt = k as f64 * 0.02;
            assert_relative_eq!(
                s.position(0.2 - dt).z,
                s.position(0.2 + dt).z,
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn raised_touchdown_lifts_apex() {
        let p = Vector3::new(0.0, 0.0, 0.0);
        let q = Vector3::new(0.3, 0.0, 0.2);
        let z = Vector3::z();
        let s = swing_trajectory(p, q, z, z, 0.0, 0.5, 0.3, -0.3, 0.2, 0.08).unwrap();
        // sample the maximum
        let max_z = (0..=100)
            .map(|k| s.position(k as f64 * 0.005).z)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(max_z >= 0.2 + 0.08 - 1e-9);
    }

    #[test]
    fn touchdown_velocity_matches_configuration() {
        let p = Vector3::new(0.0, 0.0, 0.0);
        let q = Vector3::new(0.3, 0.1, 0.05);
        let n1 = Vector3::new(0.1, 0.0, 0.99).normalize();
        let s = swing_trajectory(p, q, Vector3::z(), n1, 0.2, 0.7, 0.3, -0.3, 0.05, 0.08).unwrap();
        let v_td = s.velocity(0.7 - 1e-12);
        let expect = n1 * -0.3;
        assert_relative_eq!((v_td - expect).norm(), 0.0, epsilon = 1e-9);
        let v_lo = s.velocity(0.2);
        assert_relative_eq!((v_lo - Vector3::new(0.0, 0.0, 0.3)).norm(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn position_is_continuous_at_apex() {
        let p = Vector3::new(0.0, 0.0, 0.1);
        let q = Vector3::new(0.4, -0.2, 0.3);
        let z = Vector3::z();
        let s = swing_trajectory(p, q, z, z, 0.0, 0.35, 0.3, -0.3, 0.3, 0.08).unwrap();
        let eps = 1e-9;
        let before = s.position(0.175 - eps);
        let after = s.position(0.175 + eps);
        assert!((before - after).norm() < 1e-6);
        let vb = s.velocity(0.175 - eps);
        let va = s.velocity(0.175 + eps);
        assert!((vb - va).norm() < 1e-6);
    }

    #[test]
    fn zero_duration_swing_is_rejected() {
        let p = Vector3::zeros();
        let z = Vector3::z();
        let r = swing_trajectory(p, p, z, z, 1.0, 1.0, 0.3, -0.3, 0.0, 0.08);
        assert!(matches!(r, Err(SplineError::DegenerateSwing(_, _))));
    }

    #[test]
    fn normal_interpolates_and_renormalizes() {
        let p = Vector3::zeros();
        let q = Vector3::new(0.3, 0.0, 0.0);
        let n0 = Vector3::z();
        let n1 = Vector3::new(0.6, 0.0, 0.8);
        let s = swing_trajectory(p, q, n0, n1, 0.0, 0.4, 0.3, -0.3, 0.0, 0.08).unwrap();
        let mid = s.normal(0.2);
        assert_relative_eq!(mid.norm(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(s.normal(0.0), n0, epsilon = 1e-12);
        assert_relative_eq!((s.normal(0.4) - n1).norm(), 0.0, epsilon = 1e-12);
    }
}
