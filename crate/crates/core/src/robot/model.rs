//! Quadruped model parameters, state layout, and the input loopshaping
//! filter.

use serde::{Deserialize, Serialize};

use crate::math::Real;

/// State dimension: 3 Euler angles, base position, body angular rate, body
/// linear velocity, 12 joint angles, 12 force-filter states, 12
/// joint-velocity-filter states.
pub const NX: usize = 48;
/// Input dimension: 12 auxiliary force inputs, 12 auxiliary joint-velocity
/// inputs.
pub const NU: usize = 24;
pub const NUM_LEGS: usize = 4;
pub const JOINTS_PER_LEG: usize = 3;
pub const NUM_JOINTS: usize = NUM_LEGS * JOINTS_PER_LEG;

/// Gimbal guard: pitch must stay inside (-pi/2 + margin, pi/2 - margin).
pub const PITCH_GUARD_MARGIN: f64 = 0.05;

/// Leg indexing: left-front, right-front, left-hind, right-hind.
pub const LEG_NAMES: [&str; 4] = ["LF", "RF", "LH", "RH"];

/// Robot parameters; all values live in the scenario configuration.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadrupedModel {
    pub torso_mass: f64,
    /// Torso center of mass offset from the base origin [m].
    pub torso_com: [f64; 3],
    /// Diagonal torso rotational inertia about its com [kg m^2].
    pub torso_inertia: [f64; 3],
    /// Masses of the hip, thigh, and shank links [kg].
    pub link_masses: [f64; 3],
    pub thigh_length: f64,
    pub shank_length: f64,
    /// Hip positions in the base frame [m], ordered LF, RF, LH, RH.
    pub hip_offsets: [[f64; 3]; 4],
    /// Per-joint-type lower position limits (HAA, HFE, KFE) [rad].
    pub q_lower: [f64; 3],
    pub q_upper: [f64; 3],
    /// Symmetric joint velocity limit [rad/s].
    pub qd_limit: f64,
    /// Symmetric joint torque limit [N m].
    pub tau_limit: f64,
    /// Foot collision sphere radius [m].
    pub foot_radius: f64,
    /// Knee collision sphere radius [m].
    pub knee_radius: f64,
    pub friction_coeff: f64,
    pub gravity: f64,
}

impl Default for QuadrupedModel {
    fn default() -> Self {
        Self {
            torso_mass: 25.0,
            torso_com: [0.0, 0.0, 0.0],
            // 0.6 x 0.4 x 0.2 m box
            torso_inertia: [0.417, 0.833, 1.083],
            link_masses: [1.5, 1.0, 0.5],
            thigh_length: 0.30,
            shank_length: 0.30,
            hip_offsets: [
                [0.30, 0.20, 0.0],
                [0.30, -0.20, 0.0],
                [-0.30, 0.20, 0.0],
                [-0.30, -0.20, 0.0],
            ],
            q_lower: [-0.7, -2.0, -2.5],
            q_upper: [0.7, 2.0, 2.5],
            qd_limit: 7.5,
            tau_limit: 80.0,
            foot_radius: 0.03,
            knee_radius: 0.06,
            friction_coeff: 0.7,
            gravity: 9.81,
        }
    }
}

impl QuadrupedModel {
    pub fn total_mass(&self) -> f64 {
        self.torso_mass + NUM_LEGS as f64 * self.link_masses.iter().sum::<f64>()
    }

    pub fn max_leg_length(&self) -> f64 {
        self.thigh_length + self.shank_length
    }

    /// Knee bend convention: front knees point backward, hind knees forward.
    ///
    /// Negative KFE pulls the knee point backward when the foot stays below
    /// the hip.
    pub fn knee_sign(&self, leg: usize) -> f64 {
        if leg < 2 {
            -1.0
        } else {
            1.0
        }
    }

    /// Left legs have positive lateral hip offset.
    pub fn side_sign(&self, leg: usize) -> f64 {
        if self.hip_offsets[leg][1] >= 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Diagonal rotational inertia of a leg link about its com, link frame.
    ///
    /// Thigh and shank are rods along z; the hip link is a compact lump at
    /// its joint. All entries stay positive so every link inertia is SPD.
    pub fn link_inertia(&self, link: usize) -> [f64; 3] {
        let m = self.link_masses[link];
        match link {
            0 => {
                let r = 0.05;
                [0.4 * m * r * r, 0.4 * m * r * r, 0.4 * m * r * r]
            }
            _ => {
                let l = if link == 1 {
                    self.thigh_length
                } else {
                    self.shank_length
                };
                let rod = m * l * l / 12.0;
                let r = 0.02;
                [rod.max(1e-6), rod.max(1e-6), (m * r * r).max(1e-6)]
            }
        }
    }
}

/// Loopshaping filter matrices, all scalar multiples of identity.
///
/// The physical signals are `lambda = C_l s_l + D_l nu_l` (contact forces,
/// base frame) and `qd_j = C_j s_j + D_j nu_j`; the filter dynamics are
/// `s_dot = nu` on both channels.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct LoopshapingFilter {
    pub c_lambda: f64,
    pub d_lambda: f64,
    pub c_j: f64,
    pub d_j: f64,
}

impl Default for LoopshapingFilter {
    fn default() -> Self {
        Self {
            c_lambda: 100.0 / 4.0,
            d_lambda: 1.0 / 4.0,
            c_j: 50.0 / 3.0,
            d_j: 1.0 / 3.0,
        }
    }
}

/// 48-dimensional robot state.
///
/// Layout: `[theta(3), p(3), omega(3), v(3), q_j(12), s_lambda(12), s_j(12)]`
/// with `theta = (roll, pitch, yaw)`, `omega`/`v` in the body frame.
#[derive(Clone, Copy, Debug)]
pub struct RobotState(pub [f64; NX]);

impl Default for RobotState {
    fn default() -> Self {
        Self([0.0; NX])
    }
}

impl RobotState {
    pub fn from_slice(x: &[f64]) -> Self {
        let mut s = [0.0; NX];
        s.copy_from_slice(x);
        Self(s)
    }

    pub fn euler(&self) -> [f64; 3] {
        [self.0[0], self.0[1], self.0[2]]
    }
    pub fn position(&self) -> [f64; 3] {
        [self.0[3], self.0[4], self.0[5]]
    }
    pub fn angular_velocity(&self) -> [f64; 3] {
        [self.0[6], self.0[7], self.0[8]]
    }
    pub fn linear_velocity(&self) -> [f64; 3] {
        [self.0[9], self.0[10], self.0[11]]
    }
    pub fn joint_angles(&self) -> [f64; NUM_JOINTS] {
        let mut q = [0.0; NUM_JOINTS];
        q.copy_from_slice(&self.0[12..24]);
        q
    }
    pub fn force_filter_states(&self) -> [f64; NUM_JOINTS] {
        let mut s = [0.0; NUM_JOINTS];
        s.copy_from_slice(&self.0[24..36]);
        s
    }
    pub fn joint_filter_states(&self) -> [f64; NUM_JOINTS] {
        let mut s = [0.0; NUM_JOINTS];
        s.copy_from_slice(&self.0[36..48]);
        s
    }

    pub fn set_euler(&mut self, v: [f64; 3]) {
        self.0[0..3].copy_from_slice(&v);
    }
    pub fn set_position(&mut self, v: [f64; 3]) {
        self.0[3..6].copy_from_slice(&v);
    }
    pub fn set_angular_velocity(&mut self, v: [f64; 3]) {
        self.0[6..9].copy_from_slice(&v);
    }
    pub fn set_linear_velocity(&mut self, v: [f64; 3]) {
        self.0[9..12].copy_from_slice(&v);
    }
    pub fn set_joint_angles(&mut self, q: [f64; NUM_JOINTS]) {
        self.0[12..24].copy_from_slice(&q);
    }
    pub fn set_force_filter_states(&mut self, s: [f64; NUM_JOINTS]) {
        self.0[24..36].copy_from_slice(&s);
    }
    pub fn set_joint_filter_states(&mut self, s: [f64; NUM_JOINTS]) {
        self.0[36..48].copy_from_slice(&s);
    }
}

/// 24-dimensional control input: `[nu_lambda(12), nu_j(12)]`.
#[derive(Clone, Copy, Debug)]
pub struct ControlInput(pub [f64; NU]);

impl Default for ControlInput {
    fn default() -> Self {
        Self([0.0; NU])
    }
}

/// Scalar-generic view of the state vector.
pub struct StateView<R: Real> {
    pub euler: [R; 3],
    pub p: [R; 3],
    pub omega: [R; 3],
    pub v: [R; 3],
    pub qj: [R; NUM_JOINTS],
    pub s_lambda: [R; NUM_JOINTS],
    pub s_j: [R; NUM_JOINTS],
}

impl<R: Real> StateView<R> {
    pub fn from_slice(x: &[R]) -> Self {
        debug_assert_eq!(x.len(), NX);
        let mut view = Self {
            euler: [R::zero(); 3],
            p: [R::zero(); 3],
            omega: [R::zero(); 3],
            v: [R::zero(); 3],
            qj: [R::zero(); NUM_JOINTS],
            s_lambda: [R::zero(); NUM_JOINTS],
            s_j: [R::zero(); NUM_JOINTS],
        };
        view.euler.copy_from_slice(&x[0..3]);
        view.p.copy_from_slice(&x[3..6]);
        view.omega.copy_from_slice(&x[6..9]);
        view.v.copy_from_slice(&x[9..12]);
        view.qj.copy_from_slice(&x[12..24]);
        view.s_lambda.copy_from_slice(&x[24..36]);
        view.s_j.copy_from_slice(&x[36..48]);
        view
    }

    pub fn leg_joints(&self, leg: usize) -> [R; 3] {
        [
            self.qj[3 * leg],
            self.qj[3 * leg + 1],
            self.qj[3 * leg + 2],
        ]
    }
}

/// Scalar-generic view of the input vector.
pub struct InputView<R: Real> {
    pub nu_lambda: [R; NUM_JOINTS],
    pub nu_j: [R; NUM_JOINTS],
}

impl<R: Real> InputView<R> {
    pub fn from_slice(u: &[R]) -> Self {
        debug_assert_eq!(u.len(), NU);
        let mut nu_lambda = [R::zero(); NUM_JOINTS];
        let mut nu_j = [R::zero(); NUM_JOINTS];
        nu_lambda.copy_from_slice(&u[0..12]);
        nu_j.copy_from_slice(&u[12..24]);
        Self { nu_lambda, nu_j }
    }
}

/// Physical contact forces (base frame) from the filter channel.
pub fn contact_forces<R: Real>(
    filter: &LoopshapingFilter,
    s_lambda: &[R; NUM_JOINTS],
    nu_lambda: &[R; NUM_JOINTS],
) -> [R; NUM_JOINTS] {
    let c = R::constant(filter.c_lambda);
    let d = R::constant(filter.d_lambda);
    core::array::from_fn(|i| c * s_lambda[i] + d * nu_lambda[i])
}

/// Physical joint velocities from the filter channel.
pub fn joint_velocities<R: Real>(
    filter: &LoopshapingFilter,
    s_j: &[R; NUM_JOINTS],
    nu_j: &[R; NUM_JOINTS],
) -> [R; NUM_JOINTS] {
    let c = R::constant(filter.c_j);
    let d = R::constant(filter.d_j);
    core::array::from_fn(|i| c * s_j[i] + d * nu_j[i])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loopshaping_channel_is_linear() {
        let f = LoopshapingFilter::default();
        let s = [0.3; NUM_JOINTS];
        let nu = [-0.2; NUM_JOINTS];
        let l1 = contact_forces::<f64>(&f, &s, &nu);
        let s2 = [0.6; NUM_JOINTS];
        let nu2 = [-0.4; NUM_JOINTS];
        let l2 = contact_forces::<f64>(&f, &s2, &nu2);
        for i in 0..NUM_JOINTS {
            assert!((l2[i] - 2.0 * l1[i]).abs() < 1e-14);
        }
        let qd = joint_velocities::<f64>(&f, &s, &nu);
        assert!((qd[0] - (50.0 / 3.0 * 0.3 - 0.2 / 3.0)).abs() < 1e-14);
    }

    #[test]
    fn default_model_scale() {
        let m = QuadrupedModel::default();
        assert!((m.total_mass() - 37.0).abs() < 1e-12);
        assert!((m.max_leg_length() - 0.6).abs() < 1e-12);
        for l in 0..3 {
            for v in m.link_inertia(l) {
                assert!(v > 0.0);
            }
        }
    }

    #[test]
    fn state_round_trip() {
        let mut s = RobotState::default();
        s.set_euler([0.1, 0.2, 0.3]);
        s.set_joint_angles(core::array::from_fn(|i| i as f64 * 0.01));
        let view = StateView::<f64>::from_slice(&s.0);
        assert_eq!(view.euler, [0.1, 0.2, 0.3]);
        assert_eq!(view.leg_joints(2)[0], 0.06);
    }
}
