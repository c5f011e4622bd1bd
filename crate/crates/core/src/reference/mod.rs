//! Reference generation: gait schedules, base extrapolation, foothold
//! selection, swing splines, and force references.

mod gait;
mod generator;
mod spline;

pub use gait::{GaitPattern, GaitSchedule, PhaseInterval};
pub use generator::{
    force_reference, nominal_foothold, plane_below, project_to_plane, BaseSample, Command,
    CommandProfile, FootholdProjection, KinematicPenalty, LegPhaseRef, MotionReference,
    ReferenceConfig, ReferenceError, ReferenceGenerator, TerrainContext,
};
pub use spline::{swing_trajectory, QuinticSegment, SplineError, SwingSpline};
