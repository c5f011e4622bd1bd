//! Terrain-aware nonlinear model predictive control for a 12-DOF quadruped.
//!
//! The crate covers the full desk-scale pipeline:
//!
//! - [`map`] — 2.5D elevation maps: inpainting, median filtering, and per-cell
//!   steppability classification.
//! - [`segmentation`] — decomposition of steppable terrain into planar regions
//!   with polygonal boundaries (and holes), plus the smoothed torso-reference
//!   layer.
//! - [`sdf`] — dense signed distance fields built from the elevation map with
//!   per-voxel value and gradient storage.
//! - [`robot`] — quadruped kinematics and the 48-state / 24-input MPC dynamics
//!   model with input loopshaping.
//! - [`reference`] — gait schedules, base extrapolation, foothold selection,
//!   swing splines, and force references.
//! - [`ocp`] — optimal-control-problem assembly: tracking costs, relaxed
//!   log-barrier penalties, equality constraints, convex foothold regions, and
//!   the LQR terminal cost.
//! - [`solver`] — multiple-shooting SQP with real-time iteration, equality
//!   constraint projection, a Riccati-based QP solve, and a filter line-search.
//! - [`harness`] — scenario definition, closed-loop simulation, metrics, and
//!   benchmarks.
//!
//! The `pmpc` binary exposes the file-level workflows (`segment`, `sdf`, `run`,
//! `bench-sdf`, `compare`); the `examples/` directory shows how to drive each
//! subsystem from library code.

pub mod harness;
pub mod map;
pub mod math;
pub mod ocp;
pub mod reference;
pub mod robot;
pub mod sdf;
pub mod segmentation;
pub mod solver;
