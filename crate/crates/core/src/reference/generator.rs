//! Motion and force reference generation.
//!
//! Converts user velocity commands, the gait schedule, and the segmented
//! terrain into a full base / foot / joint / force reference over the MPC
//! horizon. Runs at the head of every MPC iteration.

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::map::ElevationMap;
use crate::math::{euler_rate_map, rotation_zyx};
use crate::reference::gait::{GaitSchedule, PhaseInterval};
use crate::reference::spline::{swing_trajectory, SplineError, SwingSpline};
use crate::robot::{
    forward_kinematics, inverse_kinematics, QuadrupedModel, RobotState, NUM_LEGS,
};
use crate::segmentation::{closest_point_in_region, point_in_region, SegmentedPlane};

/// Instantaneous user command.
#[derive(Clone, Copy, Debug, Default)]
pub struct Command {
    /// Planar velocity in the heading frame [m/s].
    pub v_xy: [f64; 2],
    pub yaw_rate: f64,
}

/// Zero-order-hold command profile: knots of (time, vx, vy, yaw_rate).
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct CommandProfile {
    pub knots: Vec<(f64, f64, f64, f64)>,
}

impl CommandProfile {
    pub fn constant(vx: f64, vy: f64, yaw_rate: f64) -> Self {
        Self {
            knots: vec![(0.0, vx, vy, yaw_rate)],
        }
    }

    pub fn at(&self, t: f64) -> Command {
        let mut cmd = Command::default();
        for &(tk, vx, vy, wz) in &self.knots {
            if tk <= t {
                cmd = Command {
                    v_xy: [vx, vy],
                    yaw_rate: wz,
                };
            } else {
                break;
            }
        }
        cmd
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ReferenceConfig {
    /// Nominal base height above the terrain [m].
    pub h_nom: f64,
    /// Weight of the kinematic penalty in the foothold plane selection.
    pub w_kin: f64,
    /// Leg extension threshold as a fraction of the maximum leg length.
    pub extension_fraction: f64,
    /// Swing liftoff speed along the liftoff plane normal [m/s].
    pub liftoff_speed: f64,
    /// Swing touchdown speed along the touchdown plane normal [m/s], signed.
    pub touchdown_speed: f64,
    /// Apex clearance above the highest terrain between footholds [m].
    pub apex_clearance: f64,
    /// Footholds farther than this from the nominal stay unassigned [m].
    pub reach_limit: f64,
    /// Base reference sampling interval [s].
    pub sample_dt: f64,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self {
            h_nom: 0.5,
            w_kin: 0.5,
            extension_fraction: 0.9,
            liftoff_speed: 0.3,
            touchdown_speed: -0.3,
            apex_clearance: 0.08,
            reach_limit: 0.6,
            sample_dt: 0.01,
        }
    }
}

/// One sample of the base reference.
#[derive(Clone, Copy, Debug)]
pub struct BaseSample {
    pub t: f64,
    /// (roll, pitch, yaw)
    pub euler: [f64; 3],
    pub position: Vector3<f64>,
    /// Body-frame angular rate.
    pub omega: Vector3<f64>,
    /// Body-frame linear velocity.
    pub velocity: Vector3<f64>,
}

/// Reference data of one gait phase of one leg.
#[derive(Clone, Debug)]
pub struct LegPhaseRef {
    pub interval: PhaseInterval,
    pub plane_id: Option<usize>,
    /// Touchdown/stance point for contact phases; liftoff point for swings.
    pub hold_point: Vector3<f64>,
    pub spline: Option<SwingSpline>,
    /// Depth below the map surface at liftoff (>= 0), drives the collision
    /// constraint shaping.
    pub liftoff_penetration: f64,
    /// Whether the velocity feedback offset was applied (first upcoming
    /// foothold only).
    pub feedback_applied: bool,
}

/// Full motion reference over one horizon.
#[derive(Clone, Debug)]
pub struct MotionReference {
    pub t0: f64,
    pub horizon: f64,
    pub samples: Vec<BaseSample>,
    pub legs: [Vec<LegPhaseRef>; NUM_LEGS],
    pub total_weight: f64,
    pub gait: GaitSchedule,
}

impl MotionReference {
    pub fn base_at(&self, t: f64) -> BaseSample {
        let dt = self.samples[1].t - self.samples[0].t;
        let idx = ((t - self.t0) / dt).floor().max(0.0) as usize;
        if idx + 1 >= self.samples.len() {
            return *self.samples.last().unwrap();
        }
        let (a, b) = (&self.samples[idx], &self.samples[idx + 1]);
        let s = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
        BaseSample {
            t,
            euler: [
                a.euler[0] + s * (b.euler[0] - a.euler[0]),
                a.euler[1] + s * (b.euler[1] - a.euler[1]),
                a.euler[2] + s * (b.euler[2] - a.euler[2]),
            ],
            position: a.position + s * (b.position - a.position),
            omega: a.omega + s * (b.omega - a.omega),
            velocity: a.velocity + s * (b.velocity - a.velocity),
        }
    }

    pub fn phase_ref(&self, leg: usize, t: f64) -> &LegPhaseRef {
        let phases = &self.legs[leg];
        for ph in phases {
            if t < ph.interval.end {
                return ph;
            }
        }
        phases.last().expect("phase list covers the horizon")
    }

    pub fn foot_position(&self, leg: usize, t: f64) -> Vector3<f64> {
        let ph = self.phase_ref(leg, t);
        match &ph.spline {
            Some(spline) => spline.position(t),
            None => ph.hold_point,
        }
    }

    pub fn foot_velocity(&self, leg: usize, t: f64) -> Vector3<f64> {
        let ph = self.phase_ref(leg, t);
        match &ph.spline {
            Some(spline) => spline.velocity(t),
            None => Vector3::zeros(),
        }
    }

    /// Interpolated surface normal during swing; the stance plane normal (or
    /// +z) during contact.
    pub fn surface_normal(&self, leg: usize, t: f64, planes: &[SegmentedPlane]) -> Vector3<f64> {
        let ph = self.phase_ref(leg, t);
        match &ph.spline {
            Some(spline) => spline.normal(t),
            None => ph
                .plane_id
                .map(|id| planes[id].normal)
                .unwrap_or_else(Vector3::z),
        }
    }

    /// Joint-angle reference from inverse kinematics of the foot reference.
    pub fn joint_ref(&self, model: &QuadrupedModel, leg: usize, t: f64) -> [f64; 3] {
        let base = self.base_at(t);
        let r = rotation_zyx(base.euler);
        let foot = self.foot_position(leg, t);
        let rel = [
            foot.x - base.position.x,
            foot.y - base.position.y,
            foot.z - base.position.z,
        ];
        let target = crate::math::m3_tr_mul_v3(r, rel);
        inverse_kinematics(model, leg, &target).0
    }

    /// World-frame contact force reference: total weight split across the
    /// stance legs, zero in swing.
    pub fn force_ref_world(&self, leg: usize, t: f64) -> Vector3<f64> {
        force_reference(&self.gait, t, self.total_weight)[leg]
    }
}

/// Equal distribution of the robot weight among the stance legs.
pub fn force_reference(
    gait: &GaitSchedule,
    t: f64,
    total_weight: f64,
) -> [Vector3<f64>; NUM_LEGS] {
    let contacts = gait.contacts_at(t);
    let n = contacts.iter().filter(|&&c| c).count();
    core::array::from_fn(|leg| {
        if contacts[leg] && n > 0 {
            Vector3::new(0.0, 0.0, total_weight / n as f64)
        } else {
            Vector3::zeros()
        }
    })
}

/// Nominal foothold: the hip at mid-contact dropped along gravity, with a
/// velocity feedback offset for the first upcoming foothold.
pub fn nominal_foothold(
    hip_at_mid_contact: Vector3<f64>,
    map: &ElevationMap,
    h_nom: f64,
    gravity: f64,
    feedback: Option<(Vector2<f64>, Vector2<f64>)>,
) -> Vector3<f64> {
    let mut xy = Vector2::new(hip_at_mid_contact.x, hip_at_mid_contact.y);
    if let Some((v_meas, v_com)) = feedback {
        xy += (h_nom / gravity).sqrt() * (v_meas - v_com);
    }
    let z = map.interpolate_height(xy.x, xy.y);
    Vector3::new(xy.x, xy.y, z)
}

/// Inputs to the kinematic penalty of the foothold plane selection.
#[derive(Clone, Copy, Debug)]
pub struct KinematicPenalty {
    pub hip_liftoff: Vector3<f64>,
    pub hip_touchdown: Vector3<f64>,
    /// Extension threshold [m].
    pub max_extension: f64,
    /// Base position and yaw at touchdown (sagittal-plane test).
    pub base_touchdown: Vector3<f64>,
    pub yaw_touchdown: f64,
    /// +1 for left legs, -1 for right legs.
    pub side_sign: f64,
}

impl KinematicPenalty {
    fn eval(&self, candidate: &Vector3<f64>) -> f64 {
        let mut pen = 0.0;
        for hip in [&self.hip_liftoff, &self.hip_touchdown] {
            let ext = (candidate - hip).norm();
            let over = (ext - self.max_extension).max(0.0);
            pen += over * over;
        }
        // crossing the body sagittal plane: lateral coordinate in the
        // heading frame must keep the leg's sign
        let dx = candidate.x - self.base_touchdown.x;
        let dy = candidate.y - self.base_touchdown.y;
        let lateral = -self.yaw_touchdown.sin() * dx + self.yaw_touchdown.cos() * dy;
        let overshoot = (-self.side_sign * lateral).max(0.0);
        pen += overshoot * overshoot;
        pen
    }
}

/// Result of projecting a nominal foothold onto the segmented planes.
#[derive(Clone, Copy, Debug)]
pub struct FootholdProjection {
    pub plane: Option<usize>,
    pub point: Vector3<f64>,
}

/// Select the best plane candidate: squared distance to the nominal plus the
/// weighted kinematic penalty, over the closest point of each plane region.
pub fn project_to_plane(
    nominal: &Vector3<f64>,
    planes: &[SegmentedPlane],
    kin: &KinematicPenalty,
    w_kin: f64,
    reach_limit: f64,
) -> FootholdProjection {
    let mut best: Option<(f64, usize, Vector3<f64>)> = None;
    for (id, plane) in planes.iter().enumerate() {
        let on_plane = plane.project_along_z(nominal.x, nominal.y);
        let uv = plane.to_plane_2d(&on_plane);
        let region = plane.region();
        let closest_uv = closest_point_in_region(uv, &region);
        let candidate = plane.to_world(closest_uv);
        let d2 = (nominal - candidate).norm_squared();
        let score = d2 + w_kin * kin.eval(&candidate);
        if best.map(|(s, _, _)| score < s).unwrap_or(true) {
            best = Some((score, id, candidate));
        }
    }
    match best {
        Some((_, id, point)) if (nominal - point).norm() <= reach_limit => FootholdProjection {
            plane: Some(id),
            point,
        },
        _ => FootholdProjection {
            plane: None,
            point: *nominal,
        },
    }
}

/// Find the plane under a world point: containing its vertical projection
/// and nearest in height.
pub fn plane_below(point: &Vector3<f64>, planes: &[SegmentedPlane]) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for (id, plane) in planes.iter().enumerate() {
        let on_plane = plane.project_along_z(point.x, point.y);
        let uv = plane.to_plane_2d(&on_plane);
        if point_in_region(uv, &plane.region()) {
            let dz = (on_plane.z - point.z).abs();
            if best.map(|(d, _)| dz < d).unwrap_or(true) {
                best = Some((dz, id));
            }
        }
    }
    best.map(|(_, id)| id)
}

/// Per-leg memory carried across MPC iterations: the liftoff anchor of the
/// ongoing swing phase.
#[derive(Clone, Copy, Debug, Default)]
struct SwingAnchor {
    phase_start: f64,
    position: [f64; 3],
    plane: Option<usize>,
    penetration: f64,
    valid: bool,
}

/// Terrain inputs for reference generation.
pub struct TerrainContext<'a> {
    pub map: &'a ElevationMap,
    pub planes: &'a [SegmentedPlane],
    /// Smoothed torso height layer, same geometry as `map`.
    pub torso_layer: &'a [f64],
}

impl TerrainContext<'_> {
    fn torso_height(&self, x: f64, y: f64) -> f64 {
        crate::map::interpolate_field(self.map, self.torso_layer, x, y)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReferenceError {
    #[error(transparent)]
    Spline(#[from] SplineError),
}

/// Stateful generator; one instance drives one closed-loop run.
pub struct ReferenceGenerator {
    pub config: ReferenceConfig,
    anchors: [SwingAnchor; NUM_LEGS],
    /// Frozen foothold selections keyed by (leg, touchdown time in ms):
    /// once a swing passes its midpoint, the upcoming touchdown target stays
    /// fixed so the reference cannot jump while the region is frozen.
    frozen_footholds: std::collections::HashMap<(usize, i64), (Option<usize>, Vector3<f64>)>,
}

impl ReferenceGenerator {
    pub fn new(config: ReferenceConfig) -> Self {
        Self {
            config,
            anchors: [SwingAnchor::default(); NUM_LEGS],
            frozen_footholds: std::collections::HashMap::new(),
        }
    }

    fn touchdown_key(leg: usize, touchdown: f64) -> (usize, i64) {
        (leg, (touchdown * 1000.0).round() as i64)
    }

    /// Build the reference for the horizon starting at `t0`.
    pub fn generate(
        &mut self,
        model: &QuadrupedModel,
        terrain: &TerrainContext,
        gait: &GaitSchedule,
        commands: &CommandProfile,
        state: &RobotState,
        t0: f64,
        horizon: f64,
    ) -> Result<MotionReference, ReferenceError> {
        let extend = horizon + gait.pattern.cycle.max(0.5);
        let samples = self.extrapolate_base(terrain, commands, state, t0, extend);
        let base_at = |t: f64| -> BaseSample { interp_base(&samples, t0, t) };

        let fk = forward_kinematics(model, state);
        let r_now = rotation_zyx(state.euler());
        let v_body = state.linear_velocity();
        let v_world = crate::math::m3_mul_v3(r_now, v_body);
        let v_meas = Vector2::new(v_world[0], v_world[1]);
        let cmd_now = commands.at(t0);
        let yaw_now = state.euler()[2];
        let v_com_world = Vector2::new(
            yaw_now.cos() * cmd_now.v_xy[0] - yaw_now.sin() * cmd_now.v_xy[1],
            yaw_now.sin() * cmd_now.v_xy[0] + yaw_now.cos() * cmd_now.v_xy[1],
        );

        let mut legs: [Vec<LegPhaseRef>; NUM_LEGS] = Default::default();
        for leg in 0..NUM_LEGS {
            let phases = gait.phases_in(leg, t0, t0 + extend);
            let mut refs: Vec<LegPhaseRef> = Vec::with_capacity(phases.len());
            let mut first_upcoming = true;
            // pass 1: contact phases and their footholds
            for ph in &phases {
                if ph.contact {
                    let (plane_id, point) = if ph.start <= t0 + 1e-9 {
                        // ongoing stance: keep the current foot position
                        let p = Vector3::from(fk.feet[leg]);
                        (plane_below(&p, terrain.planes), p)
                    } else {
                        let t_mid = 0.5 * (ph.start + ph.end.min(ph.start + gait.pattern.cycle));
                        let hip = hip_world(model, &base_at(t_mid), leg);
                        let feedback = if first_upcoming {
                            Some((v_meas, v_com_world))
                        } else {
                            None
                        };
                        let nominal = nominal_foothold(
                            hip,
                            terrain.map,
                            self.config.h_nom,
                            model.gravity,
                            feedback,
                        );
                        let base_td = base_at(ph.start);
                        let kin = KinematicPenalty {
                            hip_liftoff: hip_world(model, &base_at(ph.start), leg),
                            hip_touchdown: hip_world(
                                model,
                                &base_at(ph.end.min(ph.start + gait.pattern.cycle)),
                                leg,
                            ),
                            max_extension: self.config.extension_fraction
                                * model.max_leg_length(),
                            base_touchdown: base_td.position,
                            yaw_touchdown: base_td.euler[2],
                            side_sign: model.side_sign(leg),
                        };
                        // a touchdown closing the current swing freezes at
                        // the swing midpoint together with its region
                        let now_phase = gait.phase_at(leg, t0);
                        let freeze = !now_phase.contact
                            && (now_phase.end - ph.start).abs() < 1e-6
                            && (t0 - now_phase.start) / (now_phase.end - now_phase.start)
                                >= 0.5;
                        let key = Self::touchdown_key(leg, ph.start);
                        if freeze {
                            if let Some((plane, point)) = self.frozen_footholds.get(&key) {
                                (*plane, *point)
                            } else {
                                let proj = project_to_plane(
                                    &nominal,
                                    terrain.planes,
                                    &kin,
                                    self.config.w_kin,
                                    self.config.reach_limit,
                                );
                                self.frozen_footholds
                                    .insert(key, (proj.plane, proj.point));
                                (proj.plane, proj.point)
                            }
                        } else {
                            let proj = project_to_plane(
                                &nominal,
                                terrain.planes,
                                &kin,
                                self.config.w_kin,
                                self.config.reach_limit,
                            );
                            self.frozen_footholds.insert(key, (proj.plane, proj.point));
                            (proj.plane, proj.point)
                        }
                    };
                    if ph.start > t0 + 1e-9 {
                        first_upcoming = false;
                    }
                    refs.push(LegPhaseRef {
                        interval: *ph,
                        plane_id,
                        hold_point: point,
                        spline: None,
                        liftoff_penetration: 0.0,
                        feedback_applied: false,
                    });
                } else {
                    refs.push(LegPhaseRef {
                        interval: *ph,
                        plane_id: None,
                        hold_point: Vector3::from(fk.feet[leg]),
                        spline: None,
                        liftoff_penetration: 0.0,
                        feedback_applied: false,
                    });
                }
            }
            // pass 2: swing splines between the surrounding contact holds
            for i in 0..refs.len() {
                if refs[i].interval.contact {
                    continue;
                }
                let interval = refs[i].interval;
                let (liftoff, lo_plane, penetration) = if interval.start <= t0 + 1e-9 {
                    // ongoing swing: anchor from memory, set on first sight
                    let anchor = &mut self.anchors[leg];
                    if !anchor.valid || (anchor.phase_start - interval.start).abs() > 1e-6 {
                        let p = Vector3::from(fk.feet[leg]);
                        let surface = terrain.map.interpolate_height(p.x, p.y);
                        *anchor = SwingAnchor {
                            phase_start: interval.start,
                            position: [p.x, p.y, p.z],
                            plane: plane_below(&p, terrain.planes),
                            penetration: (surface - p.z).max(0.0),
                            valid: true,
                        };
                    }
                    (
                        Vector3::from(anchor.position),
                        anchor.plane,
                        anchor.penetration,
                    )
                } else {
                    let prev = refs[..i]
                        .iter()
                        .rev()
                        .find(|r| r.interval.contact)
                        .expect("swing preceded by a contact phase");
                    (prev.hold_point, prev.plane_id, 0.0)
                };
                let next = refs[i + 1..]
                    .iter()
                    .find(|r| r.interval.contact);
                let Some(next) = next else {
                    // swing extends past the generated window; hold position
                    continue;
                };
                let touchdown = next.hold_point;
                let td_plane = next.plane_id;
                let n_lo = lo_plane
                    .map(|id| terrain.planes[id].normal)
                    .unwrap_or_else(Vector3::z);
                let n_td = td_plane
                    .map(|id| terrain.planes[id].normal)
                    .unwrap_or_else(Vector3::z);
                let max_h = max_terrain_between(terrain.map, &liftoff, &touchdown);
                let spline = swing_trajectory(
                    liftoff,
                    touchdown,
                    n_lo,
                    n_td,
                    interval.start,
                    interval.end,
                    self.config.liftoff_speed,
                    self.config.touchdown_speed,
                    max_h,
                    self.config.apex_clearance,
                )?;
                refs[i].spline = Some(spline);
                refs[i].hold_point = liftoff;
                refs[i].plane_id = td_plane;
                refs[i].liftoff_penetration = penetration;
            }
            legs[leg] = refs;
        }
        // clear stale anchors for legs currently in contact
        for leg in 0..NUM_LEGS {
            if gait.in_contact(leg, t0) {
                self.anchors[leg].valid = false;
            }
        }
        // drop frozen selections whose touchdown already happened
        let cutoff = ((t0 - 0.05) * 1000.0).round() as i64;
        self.frozen_footholds.retain(|&(_, td), _| td >= cutoff);
        Ok(MotionReference {
            t0,
            horizon,
            samples,
            legs,
            total_weight: model.total_mass() * model.gravity,
            gait: gait.clone(),
        })
    }

    /// Integrate the commanded planar twist and fit height and attitude to
    /// the torso reference layer through the four hip points.
    fn extrapolate_base(
        &self,
        terrain: &TerrainContext,
        commands: &CommandProfile,
        state: &RobotState,
        t0: f64,
        duration: f64,
    ) -> Vec<BaseSample> {
        let dt = self.config.sample_dt;
        let n = (duration / dt).ceil() as usize + 1;
        let model_hips = DEFAULT_HIP_XY;
        let mut poses = Vec::with_capacity(n);
        let (mut x, mut y) = (state.position()[0], state.position()[1]);
        let mut yaw = state.euler()[2];
        for k in 0..n {
            let t = t0 + k as f64 * dt;
            poses.push((t, x, y, yaw));
            let cmd = commands.at(t);
            // exact constant-twist integration over the sample interval
            let (vx, vy, wz) = (cmd.v_xy[0], cmd.v_xy[1], cmd.yaw_rate);
            if wz.abs() < 1e-9 {
                x += (yaw.cos() * vx - yaw.sin() * vy) * dt;
                y += (yaw.sin() * vx + yaw.cos() * vy) * dt;
            } else {
                let dyaw = wz * dt;
                let (s, c) = (dyaw.sin(), dyaw.cos());
                let ax = (vx * s - vy * (1.0 - c)) / wz;
                let ay = (vx * (1.0 - c) + vy * s) / wz;
                x += yaw.cos() * ax - yaw.sin() * ay;
                y += yaw.sin() * ax + yaw.cos() * ay;
            }
            yaw += wz * dt;
        }
        // height and attitude from the torso layer
        let mut samples: Vec<BaseSample> = Vec::with_capacity(n);
        for &(t, x, y, yaw) in &poses {
            let (sin_y, cos_y) = (yaw.sin(), yaw.cos());
            let mut pts = [[0.0; 3]; 4];
            for (i, hip) in model_hips.iter().enumerate() {
                let hx = x + cos_y * hip[0] - sin_y * hip[1];
                let hy = y + sin_y * hip[0] + cos_y * hip[1];
                let hz = terrain.torso_height(hx, hy) + self.config.h_nom;
                pts[i] = [hx, hy, hz];
            }
            let (a, b, c) = ls_plane(&pts);
            let z = a * x + b * y + c;
            let slope_fwd = a * cos_y + b * sin_y;
            let slope_lat = -a * sin_y + b * cos_y;
            let pitch = (-slope_fwd).atan();
            let roll = (slope_lat * pitch.cos()).atan();
            samples.push(BaseSample {
                t,
                euler: [roll, pitch, yaw],
                position: Vector3::new(x, y, z),
                omega: Vector3::zeros(),
                velocity: Vector3::zeros(),
            });
        }
        // twists by differencing consecutive poses
        for k in 0..samples.len() {
            let (i, j) = if k + 1 < samples.len() {
                (k, k + 1)
            } else {
                (k - 1, k)
            };
            let (si, sj) = (samples[i], samples[j]);
            let h = sj.t - si.t;
            let dp_world = (sj.position - si.position) / h;
            let de = [
                (sj.euler[0] - si.euler[0]) / h,
                (sj.euler[1] - si.euler[1]) / h,
                (sj.euler[2] - si.euler[2]) / h,
            ];
            let r = rotation_zyx(samples[k].euler);
            let v_body = crate::math::m3_tr_mul_v3(r, [dp_world.x, dp_world.y, dp_world.z]);
            // omega = T(theta)^{-1} euler_rate
            let t_map = euler_rate_map(samples[k].euler);
            let omega = solve3(t_map, de);
            samples[k].velocity = Vector3::from(v_body);
            samples[k].omega = Vector3::from(omega);
        }
        samples
    }
}

/// Hip xy offsets used for the attitude fit; matches the default model.
const DEFAULT_HIP_XY: [[f64; 2]; 4] = [[0.30, 0.20], [0.30, -0.20], [-0.30, 0.20], [-0.30, -0.20]];

fn interp_base(samples: &[BaseSample], t0: f64, t: f64) -> BaseSample {
    let dt = samples[1].t - samples[0].t;
    let idx = ((t - t0) / dt).floor().max(0.0) as usize;
    if idx + 1 >= samples.len() {
        return *samples.last().unwrap();
    }
    let (a, b) = (&samples[idx], &samples[idx + 1]);
    let s = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
    BaseSample {
        t,
        euler: [
            a.euler[0] + s * (b.euler[0] - a.euler[0]),
            a.euler[1] + s * (b.euler[1] - a.euler[1]),
            a.euler[2] + s * (b.euler[2] - a.euler[2]),
        ],
        position: a.position + s * (b.position - a.position),
        omega: a.omega + s * (b.omega - a.omega),
        velocity: a.velocity + s * (b.velocity - a.velocity),
    }
}

fn hip_world(model: &QuadrupedModel, base: &BaseSample, leg: usize) -> Vector3<f64> {
    let r = rotation_zyx(base.euler);
    let hip = model.hip_offsets[leg];
    let world = crate::math::m3_mul_v3(r, hip);
    base.position + Vector3::from(world)
}

/// Least-squares plane `z = a x + b y + c` through the given points.
fn ls_plane(pts: &[[f64; 3]; 4]) -> (f64, f64, f64) {
    let mut ata = Matrix3::zeros();
    let mut atz = Vector3::zeros();
    for p in pts {
        let row = Vector3::new(p[0], p[1], 1.0);
        ata += row * row.transpose();
        atz += row * p[2];
    }
    let sol = ata
        .lu()
        .solve(&atz)
        .unwrap_or_else(|| Vector3::new(0.0, 0.0, pts.iter().map(|p| p[2]).sum::<f64>() / 4.0));
    (sol.x, sol.y, sol.z)
}

fn solve3(m: crate::math::Mat3<f64>, rhs: [f64; 3]) -> [f64; 3] {
    let mm = Matrix3::from_fn(|i, j| m[i][j]);
    let sol = mm
        .lu()
        .solve(&Vector3::from(rhs))
        .unwrap_or_else(|| Vector3::from(rhs));
    [sol.x, sol.y, sol.z]
}

fn max_terrain_between(map: &ElevationMap, a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let steps = 20;
    let mut max_h = f64::NEG_INFINITY;
    for k in 0..=steps {
        let s = k as f64 / steps as f64;
        let x = a.x + s * (b.x - a.x);
        let y = a.y + s * (b.y - a.y);
        max_h = max_h.max(map.interpolate_height(x, y));
    }
    max_h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::classify_steppability;
    use crate::reference::gait::GaitPattern;
    use crate::robot::nominal_stance_joints;
    use crate::segmentation::{segment, SegmentationParams, SegmentationResult};
    use approx::assert_relative_eq;

    fn flat_world(z: f64) -> (ElevationMap, SegmentationResult) {
        let map = classify_steppability(&ElevationMap::from_heights(
            0.04,
            (-2.0, -2.0),
            100,
            100,
            vec![z; 10000],
        ));
        let seg = segment(&map, &SegmentationParams::default());
        (map, seg)
    }

    fn stance_state(model: &QuadrupedModel, z: f64) -> RobotState {
        let mut s = RobotState::default();
        s.set_position([0.0, 0.0, z + 0.5]);
        s.set_joint_angles(nominal_stance_joints(model, 0.5));
        s
    }

    #[test]
    fn zero_command_on_flat_ground_holds_pose() {
        let model = QuadrupedModel::default();
        let (map, seg) = flat_world(0.0);
        let terrain = TerrainContext {
            map: &map,
            planes: &seg.planes,
            torso_layer: &seg.torso_reference,
        };
        let gait = GaitSchedule::new(GaitPattern::stance(), 0.0);
        let commands = CommandProfile::constant(0.0, 0.0, 0.0);
        let state = stance_state(&model, 0.0);
        let mut gen = ReferenceGenerator::new(ReferenceConfig::default());
        let r = gen
            .generate(&model, &terrain, &gait, &commands, &state, 0.0, 1.0)
            .unwrap();
        for k in 0..=10 {
            let b = r.base_at(k as f64 * 0.1);
            assert_relative_eq!(b.position.z, 0.5, epsilon = 2e-3);
            assert!(b.euler[0].abs() < 1e-6 && b.euler[1].abs() < 1e-6);
            assert!(b.position.x.abs() < 1e-9 && b.position.y.abs() < 1e-9);
        }
    }

    #[test]
    fn constant_velocity_advances_linearly() {
        let model = QuadrupedModel::default();
        let (map, seg) = flat_world(0.0);
        let terrain = TerrainContext {
            map: &map,
            planes: &seg.planes,
            torso_layer: &seg.torso_reference,
        };
        let gait = GaitSchedule::new(GaitPattern::stance(), 0.0);
        let commands = CommandProfile::constant(0.5, 0.0, 0.0);
        let state = stance_state(&model, 0.0);
        let mut gen = ReferenceGenerator::new(ReferenceConfig::default());
        let r = gen
            .generate(&model, &terrain, &gait, &commands, &state, 0.0, 1.0)
            .unwrap();
        let b = r.base_at(1.0);
        assert_relative_eq!(b.position.x, 0.5, epsilon = 1e-6);
        assert_relative_eq!(b.velocity.x, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn terrace_straddle_pitches_the_base() {
        // step of 0.3 m halfway through the map
        let map = classify_steppability(&ElevationMap::from_fn(
            0.04,
            (-2.0, -2.0),
            100,
            100,
            |x, _| if x < 0.0 { 0.0 } else { 0.3 },
        ));
        let seg = segment(&map, &SegmentationParams::default());
        let terrain = TerrainContext {
            map: &map,
            planes: &seg.planes,
            torso_layer: &seg.torso_reference,
        };
        let model = QuadrupedModel::default();
        let gait = GaitSchedule::new(GaitPattern::stance(), 0.0);
        let commands = CommandProfile::constant(0.0, 0.0, 0.0);
        let state = stance_state(&model, 0.0);
        let mut gen = ReferenceGenerator::new(ReferenceConfig::default());
        let r = gen
            .generate(&model, &terrain, &gait, &commands, &state, 0.0, 1.0)
            .unwrap();
        let b = r.base_at(0.0);
        // oracle: closed-form LS plane over the four smoothed hip heights
        let mut pts = [[0.0; 3]; 4];
        for (i, hip) in DEFAULT_HIP_XY.iter().enumerate() {
            pts[i] = [
                hip[0],
                hip[1],
                terrain.torso_height(hip[0], hip[1]) + 0.5,
            ];
        }
        let (a, _, _) = ls_plane(&pts);
        let expect_pitch = (-a).atan();
        assert_relative_eq!(b.euler[1], expect_pitch, epsilon = 1e-9);
        assert!(b.euler[1] < -0.05, "uphill straddle pitches nose up");
    }

    #[test]
    fn foothold_feedback_offset_matches_closed_form() {
        // hips dropped straight down, first upcoming foothold shifted by
        // sqrt(h/g) * velocity error
        let model = QuadrupedModel::default();
        let (map, _) = flat_world(0.0);
        let hip = Vector3::new(0.3, 0.2, 0.5);
        let v_meas = Vector2::new(0.2, 0.0);
        let v_com = Vector2::new(0.0, 0.0);
        let p = nominal_foothold(hip, &map, 0.49, model.gravity, Some((v_meas, v_com)));
        let expect = (0.49f64 / 9.81).sqrt() * 0.2;
        assert_relative_eq!(p.x, 0.3 + expect, epsilon = 1e-12);
        assert_relative_eq!(p.y, 0.2, epsilon = 1e-12);
        assert_relative_eq!(p.z, 0.0, epsilon = 1e-12);
        let p0 = nominal_foothold(hip, &map, 0.49, model.gravity, Some((v_com, v_com)));
        assert_relative_eq!(p0.x, 0.3, epsilon = 1e-12);
    }

    #[test]
    fn projection_keeps_nominal_inside_plane() {
        let (_, seg) = flat_world(0.0);
        let nominal = Vector3::new(0.3, 0.2, 0.0);
        let kin = KinematicPenalty {
            hip_liftoff: Vector3::new(0.3, 0.2, 0.5),
            hip_touchdown: Vector3::new(0.3, 0.2, 0.5),
            max_extension: 0.54,
            base_touchdown: Vector3::new(0.0, 0.0, 0.5),
            yaw_touchdown: 0.0,
            side_sign: 1.0,
        };
        let proj = project_to_plane(&nominal, &seg.planes, &kin, 0.5, 0.6);
        assert_eq!(proj.plane, Some(0));
        assert_relative_eq!((proj.point - nominal).norm(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn projection_snaps_to_floor_height() {
        let (_, seg) = flat_world(0.25);
        let nominal = Vector3::new(0.1, 0.1, 0.0);
        let kin = KinematicPenalty {
            hip_liftoff: Vector3::new(0.1, 0.1, 0.75),
            hip_touchdown: Vector3::new(0.1, 0.1, 0.75),
            max_extension: 0.54,
            base_touchdown: Vector3::new(0.0, 0.0, 0.75),
            yaw_touchdown: 0.0,
            side_sign: 1.0,
        };
        let proj = project_to_plane(&nominal, &seg.planes, &kin, 0.5, 0.6);
        assert_relative_eq!(proj.point.z, 0.25, epsilon = 1e-9);
    }

    #[test]
    fn kinematic_penalty_prefers_reachable_stone() {
        // two stones: nearer one violates extension, farther one does not
        let map = classify_steppability(&ElevationMap::from_fn(
            0.04,
            (-1.0, -1.0),
            50,
            50,
            |x, _| {
                if !(-0.1..0.3).contains(&x) {
                    0.0
                } else {
                    // deep trench splits the floor into two stones
                    -0.8
                }
            },
        ));
        let seg = segment(&map, &SegmentationParams::default());
        assert!(seg.planes.len() >= 2);
        let nominal = Vector3::new(0.0, 0.0, 0.0);
        // hip placed so the left stone needs an over-extended leg
        let kin = KinematicPenalty {
            hip_liftoff: Vector3::new(0.45, 0.0, 0.5),
            hip_touchdown: Vector3::new(0.45, 0.0, 0.5),
            max_extension: 0.54,
            base_touchdown: Vector3::new(0.15, -0.2, 0.5),
            yaw_touchdown: 0.0,
            side_sign: 1.0,
        };
        let strong = project_to_plane(&nominal, &seg.planes, &kin, 50.0, 1.0);
        let weak = project_to_plane(&nominal, &seg.planes, &kin, 0.0, 1.0);
        // with no kinematic weight the closest stone wins (x < -0.2 side),
        // with a strong weight the selection flips to the reachable side
        assert!(weak.point.x <= nominal.x);
        assert!(strong.point.x > nominal.x, "expected the reachable stone");
    }

    #[test]
    fn trot_reference_produces_swing_splines_and_forces() {
        let model = QuadrupedModel::default();
        let (map, seg) = flat_world(0.0);
        let terrain = TerrainContext {
            map: &map,
            planes: &seg.planes,
            torso_layer: &seg.torso_reference,
        };
        let gait = GaitSchedule::new(GaitPattern::trot(), 0.0);
        let commands = CommandProfile::constant(0.3, 0.0, 0.0);
        let state = stance_state(&model, 0.0);
        let mut gen = ReferenceGenerator::new(ReferenceConfig::default());
        let r = gen
            .generate(&model, &terrain, &gait, &commands, &state, 0.05, 1.0)
            .unwrap();
        // forces: stance legs carry weight/num_contacts
        let w = model.total_mass() * model.gravity;
        for t in [0.1, 0.4, 0.8] {
            let contacts = gait.contacts_at(t);
            let n = contacts.iter().filter(|&&c| c).count();
            let mut sum = 0.0;
            for leg in 0..4 {
                let f = r.force_ref_world(leg, t);
                if contacts[leg] {
                    assert_relative_eq!(f.z, w / n as f64, epsilon = 1e-9);
                } else {
                    assert_eq!(f.norm(), 0.0);
                }
                sum += f.z;
            }
            assert_relative_eq!(sum, w, epsilon = 1e-9);
        }
        // swing feet follow splines that start and end on the floor
        for leg in 0..4 {
            for ph in &r.legs[leg] {
                if let Some(sp) = &ph.spline {
                    assert_relative_eq!(sp.position(sp.start_time()).z, 0.0, epsilon = 1e-6);
                    assert_relative_eq!(sp.position(sp.end_time()).z, 0.0, epsilon = 1e-6);
                    let apex = sp.position(0.5 * (sp.start_time() + sp.end_time()));
                    assert!(apex.z > 0.05);
                }
            }
        }
        // foot reference is continuous across phase boundaries
        for leg in 0..4 {
            for w in r.legs[leg].windows(2) {
                let t_edge = w[0].interval.end;
                if t_edge > r.t0 + r.horizon {
                    continue;
                }
                let before = r.foot_position(leg, t_edge - 1e-9);
                let after = r.foot_position(leg, t_edge + 1e-9);
                if w[0].spline.is_some() || w[1].spline.is_some() {
                    assert!(
                        (before - after).norm() < 1e-3,
                        "foot reference jump at {t_edge}: {:?} vs {:?}",
                        before,
                        after
                    );
                }
            }
        }
    }

    #[test]
    fn first_upcoming_foothold_only_reacts_to_velocity() {
        let model = QuadrupedModel::default();
        let (map, seg) = flat_world(0.0);
        let terrain = TerrainContext {
            map: &map,
            planes: &seg.planes,
            torso_layer: &seg.torso_reference,
        };
        let gait = GaitSchedule::new(GaitPattern::trot(), 0.0);
        let commands = CommandProfile::constant(0.0, 0.0, 0.0);
        let state = stance_state(&model, 0.0);
        let mut perturbed = state;
        perturbed.set_linear_velocity([0.25, 0.0, 0.0]);
        let mut gen_a = ReferenceGenerator::new(ReferenceConfig::default());
        let mut gen_b = ReferenceGenerator::new(ReferenceConfig::default());
        let ra = gen_a
            .generate(&model, &terrain, &gait, &commands, &state, 0.05, 1.0)
            .unwrap();
        let rb = gen_b
            .generate(&model, &terrain, &gait, &commands, &perturbed, 0.05, 1.0)
            .unwrap();
        for leg in 0..4 {
            let future_contacts = |r: &MotionReference| -> Vec<Vector3<f64>> {
                r.legs[leg]
                    .iter()
                    .filter(|p| p.interval.contact && p.interval.start > 0.05)
                    .map(|p| p.hold_point)
                    .collect()
            };
            let ca = future_contacts(&ra);
            let cb = future_contacts(&rb);
            assert_eq!(ca.len(), cb.len());
            if ca.is_empty() {
                continue;
            }
            let shift = (cb[0] - ca[0]).norm();
            let expect = (0.5f64 / 9.81).sqrt() * 0.25;
            assert_relative_eq!(shift, expect, epsilon = 1e-6);
            for k in 1..ca.len() {
                assert!(
                    (cb[k] - ca[k]).norm() < 1e-9,
                    "later footholds must not move"
                );
            }
        }
    }
}
