//! Cost weights and penalty parameters.

use serde::{Deserialize, Serialize};

/// Diagonal tracking weights and auxiliary-input penalties.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct CostWeights {
    /// Base orientation error (log-map rotation vector).
    pub base_orientation: [f64; 3],
    pub base_position: [f64; 3],
    pub base_angular_velocity: [f64; 3],
    pub base_linear_velocity: [f64; 3],
    /// Per-leg joint position error.
    pub joint_position: [f64; 3],
    pub joint_velocity: [f64; 3],
    pub foot_position: [f64; 3],
    pub foot_velocity: [f64; 3],
    pub contact_force: [f64; 3],
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            base_orientation: [100.0, 300.0, 300.0],
            base_position: [1000.0, 1000.0, 1500.0],
            base_angular_velocity: [10.0, 30.0, 30.0],
            base_linear_velocity: [15.0, 15.0, 30.0],
            joint_position: [2.0, 2.0, 1.0],
            joint_velocity: [0.02, 0.02, 0.01],
            foot_position: [30.0, 30.0, 30.0],
            foot_velocity: [15.0, 15.0, 15.0],
            contact_force: [0.001, 0.001, 0.001],
        }
    }
}

impl CostWeights {
    /// Stacked diagonal: 12 base entries followed by 4 x 15 leg entries.
    pub fn stacked(&self) -> [f64; 72] {
        let mut w = [0.0; 72];
        w[0..3].copy_from_slice(&self.base_orientation);
        w[3..6].copy_from_slice(&self.base_position);
        w[6..9].copy_from_slice(&self.base_angular_velocity);
        w[9..12].copy_from_slice(&self.base_linear_velocity);
        for leg in 0..4 {
            let o = 12 + 15 * leg;
            w[o..o + 3].copy_from_slice(&self.joint_position);
            w[o + 3..o + 6].copy_from_slice(&self.joint_velocity);
            w[o + 6..o + 9].copy_from_slice(&self.foot_position);
            w[o + 9..o + 12].copy_from_slice(&self.foot_velocity);
            w[o + 12..o + 15].copy_from_slice(&self.contact_force);
        }
        w
    }
}

/// Relaxed-barrier scale `mu` and relaxation threshold `delta` per
/// constraint family. Each `delta` lives in the family's natural unit so
/// the quadratic extension stays comparably stiff across families.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct BarrierParams {
    /// Joint position box [rad].
    pub joint_position: (f64, f64),
    /// Joint velocity box [rad/s].
    pub joint_velocity: (f64, f64),
    /// Static-equilibrium torque box [N m].
    pub torque: (f64, f64),
    /// Friction cone margin [N].
    pub friction_cone: (f64, f64),
    /// Foothold half-space margin [m].
    pub foothold: (f64, f64),
    /// Collision clearance [m].
    pub collision: (f64, f64),
    /// Friction cone smoothing force [N].
    pub friction_epsilon: f64,
    /// Swing-phase normal-tracking feedback gain [1/s].
    pub swing_kp: f64,
}

impl Default for BarrierParams {
    fn default() -> Self {
        Self {
            joint_position: (0.2, 0.01),
            joint_velocity: (0.01, 0.1),
            torque: (0.01, 1.0),
            friction_cone: (0.1, 1.0),
            foothold: (0.01, 0.01),
            collision: (0.01, 0.02),
            friction_epsilon: 5.0,
            swing_kp: 10.0,
        }
    }
}
