//! Per-node problem data: contact set, references, constraint parameters.

use nalgebra::{Vector2, Vector3};

use crate::math::{m3_tr_mul_v3, rotation_zyx, Mat3};
use crate::ocp::region::{convex_region_around, FootholdRegion, RegionCache};
use crate::reference::MotionReference;
use crate::robot::{nominal_stance_joints, QuadrupedModel, NUM_LEGS};
use crate::segmentation::{frame_from_normal, SegmentedPlane};

/// Snapshot of everything one shooting node needs to evaluate its cost,
/// constraints, and dynamics.
#[derive(Clone, Debug)]
pub struct NodeData {
    pub t: f64,
    /// Duration to the next node; the terminal node keeps the nominal value
    /// for constraint scaling.
    pub dt: f64,
    pub contacts: [bool; NUM_LEGS],
    pub euler_ref: [f64; 3],
    pub r_ref: Mat3<f64>,
    pub p_ref: [f64; 3],
    pub omega_ref: [f64; 3],
    pub v_ref: [f64; 3],
    pub q_ref: [[f64; 3]; NUM_LEGS],
    pub foot_pos_ref: [[f64; 3]; NUM_LEGS],
    pub foot_vel_ref: [[f64; 3]; NUM_LEGS],
    /// Base-frame contact force references.
    pub lambda_ref_body: [[f64; 3]; NUM_LEGS],
    /// Normal-direction unit vector for the swing tracking constraint.
    pub swing_normal: [[f64; 3]; NUM_LEGS],
    /// World-to-terrain rotation for the friction cone.
    pub terrain_rot: [Mat3<f64>; NUM_LEGS],
    pub regions: [Option<FootholdRegion>; NUM_LEGS],
    /// Collision-constraint relaxation offset for swing feet.
    pub dmin: [f64; NUM_LEGS],
    pub terminal: bool,
}

impl NodeData {
    /// Synthetic all-contact node at the nominal stance configuration,
    /// used for the LQR terminal cost and tests.
    pub fn stance_template(model: &QuadrupedModel, stance_depth: f64, t: f64) -> Self {
        let q = nominal_stance_joints(model, stance_depth);
        let weight = model.total_mass() * model.gravity / 4.0;
        let mut q_ref = [[0.0; 3]; 4];
        let mut foot_pos_ref = [[0.0; 3]; 4];
        for leg in 0..4 {
            q_ref[leg] = [q[3 * leg], q[3 * leg + 1], q[3 * leg + 2]];
            let hip = model.hip_offsets[leg];
            // base sits at stance_depth, feet on the ground plane
            foot_pos_ref[leg] = [hip[0], hip[1], 0.0];
        }
        Self {
            t,
            dt: 0.015,
            contacts: [true; 4],
            euler_ref: [0.0; 3],
            r_ref: rotation_zyx([0.0; 3]),
            p_ref: [0.0, 0.0, stance_depth],
            omega_ref: [0.0; 3],
            v_ref: [0.0; 3],
            q_ref,
            foot_pos_ref,
            foot_vel_ref: [[0.0; 3]; 4],
            lambda_ref_body: [[0.0, 0.0, weight]; 4],
            swing_normal: [[0.0, 0.0, 1.0]; 4],
            terrain_rot: [crate::math::m3_identity(); 4],
            regions: [None, None, None, None],
            dmin: [0.0; 4],
            terminal: false,
        }
    }
}

/// Region-growth parameters for the convex foothold approximation.
#[derive(Clone, Copy, Debug)]
pub struct RegionParams {
    pub vertices: usize,
    pub step: f64,
    pub max_iterations: usize,
}

impl RegionParams {
    pub fn for_resolution(resolution: f64) -> Self {
        Self {
            vertices: 8,
            step: resolution,
            max_iterations: 40,
        }
    }
}

/// Build the node sequence for a grid of times.
///
/// `times` are the node times; node `k` gets `dt = times[k+1] - times[k]`
/// and the last node is marked terminal with the nominal spacing retained
/// for constraint scaling. Foothold regions for feet past the midpoint of
/// their swing are reused from the cache unchanged.
pub fn build_nodes(
    model: &QuadrupedModel,
    reference: &MotionReference,
    planes: &[SegmentedPlane],
    times: &[f64],
    region_params: &RegionParams,
    cache: &mut RegionCache,
) -> Vec<NodeData> {
    assert!(times.len() >= 2);
    let t0 = reference.t0;
    let nominal_dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    cache.prune(t0);
    let mut nodes = Vec::with_capacity(times.len());
    for (k, &t) in times.iter().enumerate() {
        let terminal = k + 1 == times.len();
        let dt = if terminal {
            nominal_dt
        } else {
            times[k + 1] - t
        };
        let base = reference.base_at(t);
        let r_ref = rotation_zyx(base.euler);
        let contacts = reference.gait.contacts_at(t);
        let mut node = NodeData {
            t,
            dt,
            contacts,
            euler_ref: base.euler,
            r_ref,
            p_ref: [base.position.x, base.position.y, base.position.z],
            omega_ref: [base.omega.x, base.omega.y, base.omega.z],
            v_ref: [base.velocity.x, base.velocity.y, base.velocity.z],
            q_ref: [[0.0; 3]; 4],
            foot_pos_ref: [[0.0; 3]; 4],
            foot_vel_ref: [[0.0; 3]; 4],
            lambda_ref_body: [[0.0; 3]; 4],
            swing_normal: [[0.0, 0.0, 1.0]; 4],
            terrain_rot: [crate::math::m3_identity(); 4],
            regions: [None, None, None, None],
            dmin: [0.0; 4],
            terminal,
        };
        for leg in 0..NUM_LEGS {
            let p_ref = reference.foot_position(leg, t);
            let v_ref = reference.foot_velocity(leg, t);
            node.foot_pos_ref[leg] = [p_ref.x, p_ref.y, p_ref.z];
            node.foot_vel_ref[leg] = [v_ref.x, v_ref.y, v_ref.z];
            node.q_ref[leg] = reference.joint_ref(model, leg, t);
            let f_world = reference.force_ref_world(leg, t);
            node.lambda_ref_body[leg] =
                m3_tr_mul_v3(r_ref, [f_world.x, f_world.y, f_world.z]);
            let n = reference.surface_normal(leg, t, planes);
            node.swing_normal[leg] = [n.x, n.y, n.z];

            let phase = reference.phase_ref(leg, t);
            if contacts[leg] {
                if let Some(plane_id) = phase.plane_id {
                    let plane = &planes[plane_id];
                    node.terrain_rot[leg] = mat_from(&frame_from_normal(&plane.normal));
                    // freeze regions for feet past 50% of the ongoing swing
                    let freeze = {
                        let now_phase = reference.phase_ref(leg, t0);
                        !now_phase.interval.contact
                            && (now_phase.interval.end - phase.interval.start).abs() < 1e-6
                            && (t0 - now_phase.interval.start)
                                / (now_phase.interval.end - now_phase.interval.start)
                                >= 0.5
                    };
                    let foothold = Vector3::from(node.foot_pos_ref[leg]);
                    let region = cache.obtain(leg, phase.interval.start, freeze, || {
                        let mut r = convex_region_around(
                            &foothold,
                            plane,
                            plane_id,
                            region_params.vertices,
                            region_params.step,
                            region_params.max_iterations,
                        );
                        r.frozen = false;
                        r
                    });
                    node.regions[leg] = Some(region);
                }
            } else {
                // collision shaping for a foot that left below the surface
                let pen = phase.liftoff_penetration;
                if pen > 0.0 {
                    let duration = phase.interval.end - phase.interval.start;
                    let s = ((t - phase.interval.start) / (0.3 * duration)).clamp(0.0, 1.0);
                    let smooth = s * s * (3.0 - 2.0 * s);
                    node.dmin[leg] = -(pen + model.foot_radius) * (1.0 - smooth);
                }
            }
        }
        nodes.push(node);
    }
    nodes
}

fn mat_from(m: &nalgebra::Matrix3<f64>) -> Mat3<f64> {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = m[(i, j)];
        }
    }
    out
}

/// Half-space evaluation used by the acceptance checks: `A p + b` of the
/// node's foothold region for a world point.
pub fn region_residuals(node: &NodeData, leg: usize, p: &Vector2<f64>, z: f64) -> Option<Vec<f64>> {
    node.regions[leg]
        .as_ref()
        .map(|r| r.evaluate(&Vector3::new(p.x, p.y, z)))
}
