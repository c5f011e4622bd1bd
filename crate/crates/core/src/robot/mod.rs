//! Quadruped kinematics and the 48-state / 24-input MPC dynamics model.

mod dynamics;
mod kinematics;
mod model;

pub use dynamics::{
    base_acceleration, bias_wrench, composite_base_inertia, continuous_dynamics,
    continuous_dynamics_view, dynamics_with_jacobians, DynamicsError, DynamicsParams, NDIR,
};
pub use kinematics::{
    foot_jacobian, foot_position_world, foot_velocity_world, forward_kinematics,
    forward_kinematics_view, inverse_kinematics, leg_chain, leg_point_jacobian,
    nominal_stance_joints, BodyPoints, LegChain,
};
pub use model::{
    contact_forces, joint_velocities, ControlInput, InputView, LoopshapingFilter,
    QuadrupedModel, RobotState, StateView, JOINTS_PER_LEG, LEG_NAMES, NUM_JOINTS, NUM_LEGS, NU,
    NX, PITCH_GUARD_MARGIN,
};
