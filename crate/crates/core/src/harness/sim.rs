//! Closed-loop simulation with the MPC model as the plant.

use nalgebra::{DVector, Vector3};
use thiserror::Error;

use crate::harness::scenario::{Scenario, ScenarioError};
use crate::harness::terrain::TerrainError;
use crate::map::{
    classify_steppability, inpaint, interpolate_field, median_filter, ElevationMap,
};
use crate::ocp::{OcpSetup, RegionParams, TerminalCostError};
use crate::reference::{MotionReference, ReferenceGenerator, TerrainContext};
use crate::robot::{
    continuous_dynamics, forward_kinematics, nominal_stance_joints, ControlInput, DynamicsError,
    DynamicsParams, RobotState, NU, NX,
};
use crate::sdf::{build_sdf, preprocess_obstacles, SdfError, SignedDistanceField, WorldBox};
use crate::segmentation::{segment, SegmentationParams, SegmentationResult};
use crate::solver::{
    IterationTelemetry, MpcController, SolveMode, SolverError, SolverSettings,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Terrain(#[from] TerrainError),
    #[error(transparent)]
    Map(#[from] crate::map::MapError),
    #[error(transparent)]
    Sdf(#[from] SdfError),
    #[error(transparent)]
    Terminal(#[from] TerminalCostError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Reference(#[from] crate::reference::ReferenceError),
}

/// Precomputed perception products for one terrain.
pub struct PerceptionProducts {
    /// Inpainted, filtered, classified map.
    pub map: ElevationMap,
    pub segmentation: SegmentationResult,
    pub sdf: SignedDistanceField,
}

/// Run the perception pipeline once: inpaint, median filter, classify,
/// segment, and build the signed distance field over the whole map.
pub fn build_perception(
    raw: &ElevationMap,
    params: &SegmentationParams,
    z_top_margin: f64,
) -> Result<PerceptionProducts, HarnessError> {
    let map = inpaint(raw)?;
    let map = median_filter(&map, 3)?;
    let map = classify_steppability(&map);
    let segmentation = segment(&map, params);
    let grid = preprocess_obstacles(&map, &segmentation.refined_steppability);
    let (min_h, max_h) = (map.min_height(), map.max_height());
    let bbox = WorldBox::new(
        [
            map.origin.0,
            map.origin.1,
            min_h,
        ],
        [
            map.origin.0 + (map.cols - 1) as f64 * map.resolution,
            map.origin.1 + (map.rows - 1) as f64 * map.resolution,
            max_h + z_top_margin,
        ],
    );
    let sdf = build_sdf(&grid, &bbox)?;
    Ok(PerceptionProducts {
        map,
        segmentation,
        sdf,
    })
}

/// Aggregate run statistics; the solver-quality rows are averages of the
/// per-iteration records (cost, scaled dynamics residual, scaled equality
/// residual).
#[derive(Clone, Debug)]
pub struct RunMetrics {
    pub mean_cost: f64,
    pub mean_dynamics_violation: f64,
    pub mean_equality_violation: f64,
    pub completed: bool,
    pub fell: bool,
    pub control_steps: usize,
    pub mean_velocity_error: f64,
    pub max_base_tracking_error: f64,
    /// Minimum foothold half-space residual over all touchdowns.
    pub min_foothold_margin: f64,
    pub touchdowns_checked: usize,
    /// Minimum joint-limit margin over the run [rad].
    pub min_joint_margin: f64,
    pub mean_iteration_ms: f64,
    pub mean_lq_qp_ms: f64,
}

impl RunMetrics {
    pub fn summary(&self) -> String {
        format!(
            "cost {:.4}  dyn {:.3e}  eq {:.3e}  vel_err {:.3}  completed {}  fell {}  foothold_margin {:.4}  joint_margin {:.4}  lq+qp {:.2} ms",
            self.mean_cost,
            self.mean_dynamics_violation,
            self.mean_equality_violation,
            self.mean_velocity_error,
            self.completed,
            self.fell,
            self.min_foothold_margin,
            self.min_joint_margin,
            self.mean_lq_qp_ms,
        )
    }
}

/// One logged control step.
#[derive(Clone, Debug)]
pub struct TrajectorySample {
    pub t: f64,
    pub state: RobotState,
    pub input: ControlInput,
    pub contacts: [bool; 4],
}

pub struct RunResult {
    pub metrics: RunMetrics,
    pub trajectory: Vec<TrajectorySample>,
    pub telemetry: Vec<IterationTelemetry>,
    /// Per-touchdown foothold checks: `(time, leg, min half-space residual)`.
    pub foothold_checks: Vec<(f64, usize, f64)>,
}

/// Initial state: base at the commanded start pose on the terrain, nominal
/// stance joints, force filter states carrying the weight split over the
/// initial contact legs.
pub fn initial_state(scenario: &Scenario, products: &PerceptionProducts) -> RobotState {
    let [x0, y0, yaw0] = scenario.run.start;
    let ground = interpolate_field(
        &products.map,
        &products.segmentation.torso_reference,
        x0,
        y0,
    );
    let h = scenario.reference.h_nom;
    let mut state = RobotState::default();
    state.set_euler([0.0, 0.0, yaw0]);
    state.set_position([x0, y0, ground + h]);
    state.set_joint_angles(nominal_stance_joints(&scenario.model, h));
    let gait = scenario.gait.schedule().expect("validated gait");
    let contacts = gait.contacts_at(0.0);
    let n = contacts.iter().filter(|&&c| c).count().max(1);
    let fz = scenario.model.total_mass() * scenario.model.gravity / n as f64;
    let mut s_lambda = [0.0; 12];
    for leg in 0..4 {
        if contacts[leg] {
            s_lambda[3 * leg + 2] = fz / scenario.filter.c_lambda;
        }
    }
    state.set_force_filter_states(s_lambda);
    state
}

/// Build the MPC controller for a scenario.
pub fn make_controller(scenario: &Scenario) -> Result<MpcController, HarnessError> {
    let setup = OcpSetup::new(
        scenario.model.clone(),
        scenario.filter,
        scenario.weights.clone(),
        scenario.barriers,
        scenario.reference.h_nom,
        scenario.solver.nominal_dt,
    )?;
    let settings = SolverSettings {
        max_iterations: scenario.solver.max_iterations,
        convergence_tolerance: scenario.solver.convergence_tolerance,
        ..Default::default()
    };
    let mut controller = MpcController::new(
        setup,
        settings,
        scenario.solver.horizon,
        scenario.solver.nominal_dt,
        RegionParams::for_resolution(0.04),
    );
    controller.tau_dist = scenario.run.tau_dist;
    Ok(controller)
}

/// Closed-loop run: regenerate references, plan, apply the first input, and
/// integrate the same model at the plant rate.
pub fn run_scenario(scenario: &Scenario, mode: SolveMode) -> Result<RunResult, HarnessError> {
    let raw = scenario.terrain.generate()?;
    let products = build_perception(&raw, &SegmentationParams::default(), 1.2)?;
    run_on_perception(scenario, mode, &products)
}

/// Run against prebuilt perception products (static terrain).
pub fn run_on_perception(
    scenario: &Scenario,
    mode: SolveMode,
    products: &PerceptionProducts,
) -> Result<RunResult, HarnessError> {
    let gait = scenario.gait.schedule()?;
    let mut controller = make_controller(scenario)?;
    let mut generator = ReferenceGenerator::new(scenario.reference.clone());
    let terrain_ctx = TerrainContext {
        map: &products.map,
        planes: &products.segmentation.planes,
        torso_layer: &products.segmentation.torso_reference,
    };
    let mut state = initial_state(scenario, products);

    let control_dt = 1.0 / scenario.solver.mpc_rate;
    let substeps = (scenario.solver.plant_rate / scenario.solver.mpc_rate).round() as usize;
    let steps = (scenario.run.duration * scenario.solver.mpc_rate).round() as usize;
    let fall_attitude = scenario.run.fall_attitude_deg.to_radians();

    let mut trajectory = Vec::with_capacity(steps);
    let mut telemetry = Vec::new();
    let mut fell = false;
    let mut sum_cost = 0.0;
    let mut sum_dyn = 0.0;
    let mut sum_eq = 0.0;
    let mut sum_vel_err = 0.0;
    let mut max_track_err: f64 = 0.0;
    let mut sum_iter_ms = 0.0;
    let mut sum_lq_qp_ms = 0.0;
    let mut solved_steps = 0usize;
    let mut min_foothold_margin = f64::INFINITY;
    let mut touchdowns_checked = 0usize;
    let mut foothold_checks: Vec<(f64, usize, f64)> = Vec::new();
    let mut min_joint_margin = f64::INFINITY;
    let mut prev_contacts = gait.contacts_at(0.0);

    for step in 0..steps {
        let t = step as f64 * control_dt;
        let reference: MotionReference = generator.generate(
            &scenario.model,
            &terrain_ctx,
            &gait,
            &scenario.commands,
            &state,
            t,
            scenario.solver.horizon,
        )?;
        let outcome = match controller.plan(
            t,
            &state,
            &reference,
            &products.segmentation.planes,
            Some(&products.sdf),
            mode,
        ) {
            Ok(o) => o,
            Err(SolverError::Dynamics(DynamicsError::GimbalGuard(_))) => {
                // attitude left the model's validity region: count as a fall
                fell = true;
                break;
            }
            Err(e) => return Err(e.into()),
        };
        if let Some(last) = outcome.telemetry.last() {
            sum_cost += last.cost;
            sum_dyn += last.dynamics_violation;
            sum_eq += last.equality_violation;
            solved_steps += 1;
        }
        for rec in &outcome.telemetry {
            sum_iter_ms += rec.lq_ms + rec.qp_ms + rec.line_search_ms;
            sum_lq_qp_ms += rec.lq_ms + rec.qp_ms;
        }
        telemetry.extend(outcome.telemetry);

        let u0 = outcome.plan.u[0].clone();
        let mut input = ControlInput::default();
        input.0.copy_from_slice(u0.as_slice());
        trajectory.push(TrajectorySample {
            t,
            state,
            input,
            contacts: gait.contacts_at(t),
        });

        // velocity tracking metric (world xy)
        {
            let cmd = scenario.commands.at(t);
            let yaw = state.euler()[2];
            let r = crate::math::rotation_zyx(state.euler());
            let v_world = crate::math::m3_mul_v3(r, state.linear_velocity());
            let v_cmd = [
                yaw.cos() * cmd.v_xy[0] - yaw.sin() * cmd.v_xy[1],
                yaw.sin() * cmd.v_xy[0] + yaw.cos() * cmd.v_xy[1],
            ];
            let err =
                ((v_world[0] - v_cmd[0]).powi(2) + (v_world[1] - v_cmd[1]).powi(2)).sqrt();
            sum_vel_err += err;
            let b = reference.base_at(t);
            let track = (Vector3::from(state.position()) - b.position).norm();
            max_track_err = max_track_err.max(track);
        }

        // integrate the plant: same model, finer explicit RK4 substeps
        let sub_dt = control_dt / substeps as f64;
        let mut guard_tripped = false;
        for s in 0..substeps {
            let ts = t + s as f64 * sub_dt;
            let params = DynamicsParams {
                contacts: gait.contacts_at(ts + 1e-9),
                tau_dist: scenario.run.tau_dist,
            };
            match rk4_step(scenario, &state, &u0, &params, sub_dt) {
                Ok(next) => state = next,
                Err(DynamicsError::GimbalGuard(_)) => {
                    guard_tripped = true;
                    break;
                }
                Err(e) => return Err(e.into()),
            }
        }
        if guard_tripped {
            fell = true;
            break;
        }

        // joint margins
        let q = state.joint_angles();
        for leg in 0..4 {
            for i in 0..3 {
                let qi = q[3 * leg + i];
                min_joint_margin = min_joint_margin
                    .min(scenario.model.q_upper[i] - qi)
                    .min(qi - scenario.model.q_lower[i]);
            }
        }

        // touchdown events: check the foothold region of the plan
        let t_next = (step + 1) as f64 * control_dt;
        let contacts_next = gait.contacts_at(t_next);
        for leg in 0..4 {
            if contacts_next[leg] && !prev_contacts[leg] {
                let phase = gait.phase_at(leg, t_next);
                if let Some(region) = controller.region_for_touchdown(leg, phase.start) {
                    let feet = forward_kinematics(&scenario.model, &state).feet;
                    let p = Vector3::from(feet[leg]);
                    let min_res = region
                        .evaluate(&p)
                        .into_iter()
                        .fold(f64::INFINITY, f64::min);
                    if min_res.is_finite() {
                        min_foothold_margin = min_foothold_margin.min(min_res);
                        touchdowns_checked += 1;
                        foothold_checks.push((t_next, leg, min_res));
                    }
                }
            }
        }
        prev_contacts = contacts_next;

        // fall detection
        let pos = state.position();
        let ground = interpolate_field(
            &products.map,
            &products.segmentation.torso_reference,
            pos[0],
            pos[1],
        );
        let euler = state.euler();
        if pos[2] - ground < scenario.run.fall_height
            || euler[0].abs() > fall_attitude
            || euler[1].abs() > fall_attitude
        {
            fell = true;
            break;
        }
    }

    let n = solved_steps.max(1) as f64;
    let steps_done = trajectory.len();
    let metrics = RunMetrics {
        mean_cost: sum_cost / n,
        mean_dynamics_violation: sum_dyn / n,
        mean_equality_violation: sum_eq / n,
        completed: !fell && steps_done == steps,
        fell,
        control_steps: steps_done,
        mean_velocity_error: sum_vel_err / steps_done.max(1) as f64,
        max_base_tracking_error: max_track_err,
        min_foothold_margin,
        touchdowns_checked,
        min_joint_margin,
        mean_iteration_ms: sum_iter_ms / n,
        mean_lq_qp_ms: sum_lq_qp_ms / n,
    };
    Ok(RunResult {
        metrics,
        trajectory,
        telemetry,
        foothold_checks,
    })
}

fn rk4_step(
    scenario: &Scenario,
    state: &RobotState,
    u: &DVector<f64>,
    params: &DynamicsParams,
    dt: f64,
) -> Result<RobotState, DynamicsError> {
    let model = &scenario.model;
    let filter = &scenario.filter;
    let ua: [f64; NU] = u.as_slice().try_into().expect("input dimension");
    let eval = |x: &[f64; NX]| continuous_dynamics(model, filter, x, &ua, params);
    let x0 = state.0;
    let k1 = eval(&x0)?;
    let mut x1 = x0;
    add_scaled(&mut x1, &k1, dt / 2.0);
    let k2 = eval(&x1)?;
    let mut x2 = x0;
    add_scaled(&mut x2, &k2, dt / 2.0);
    let k3 = eval(&x2)?;
    let mut x3 = x0;
    add_scaled(&mut x3, &k3, dt);
    let k4 = eval(&x3)?;
    let mut out = x0;
    for i in 0..NX {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(RobotState(out))
}

fn add_scaled(x: &mut [f64; NX], k: &[f64; NX], s: f64) {
    for i in 0..NX {
        x[i] += s * k[i];
    }
}

// --- output files ------------------------------------------------------------

/// Trajectory table: `t`, 48 state values, 24 input values, 4 contact flags.
pub fn write_trajectory<W: std::io::Write>(
    samples: &[TrajectorySample],
    w: &mut W,
) -> std::io::Result<()> {
    writeln!(w, "# t x[48] u[24] contact[4]")?;
    for s in samples {
        write!(w, "{:.9}", s.t)?;
        for v in s.state.0 {
            write!(w, " {v:.17e}")?;
        }
        for v in s.input.0 {
            write!(w, " {v:.17e}")?;
        }
        for c in s.contacts {
            write!(w, " {}", c as u8)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Line-delimited telemetry mirroring the per-iteration solver records.
pub fn write_telemetry<W: std::io::Write>(
    records: &[IterationTelemetry],
    w: &mut W,
) -> std::io::Result<()> {
    for (i, r) in records.iter().enumerate() {
        writeln!(
            w,
            "iter={} t={:.4} cost={:.9e} theta={:.9e} dyn={:.9e} eq={:.9e} alpha={} branch={} step={:.3e} lq_ms={:.3} qp_ms={:.3} ls_ms={:.3} trials={}",
            i,
            r.time,
            r.cost,
            r.theta,
            r.dynamics_violation,
            r.equality_violation,
            r.alpha,
            r.branch.as_str(),
            r.step_norm,
            r.lq_ms,
            r.qp_ms,
            r.line_search_ms,
            r.line_search_trials,
        )?;
    }
    Ok(())
}

pub fn write_metrics<W: std::io::Write>(m: &RunMetrics, w: &mut W) -> std::io::Result<()> {
    writeln!(w, "mean_cost {:.9e}", m.mean_cost)?;
    writeln!(w, "mean_dynamics_violation {:.9e}", m.mean_dynamics_violation)?;
    writeln!(w, "mean_equality_violation {:.9e}", m.mean_equality_violation)?;
    writeln!(w, "completed {}", m.completed)?;
    writeln!(w, "fell {}", m.fell)?;
    writeln!(w, "control_steps {}", m.control_steps)?;
    writeln!(w, "mean_velocity_error {:.9e}", m.mean_velocity_error)?;
    writeln!(w, "max_base_tracking_error {:.9e}", m.max_base_tracking_error)?;
    writeln!(w, "min_foothold_margin {:.9e}", m.min_foothold_margin)?;
    writeln!(w, "touchdowns_checked {}", m.touchdowns_checked)?;
    writeln!(w, "min_joint_margin {:.9e}", m.min_joint_margin)?;
    Ok(())
}
