//! Receding-horizon controller: grid construction, warm starting, and the
//! real-time iteration.

use nalgebra::{DMatrix, DVector};

use crate::ocp::{build_nodes, NodeData, OcpSetup, RegionCache, RegionParams};
use crate::reference::MotionReference;
use crate::robot::{RobotState, NU, NX};
use crate::sdf::SignedDistanceField;
use crate::segmentation::SegmentedPlane;
use crate::solver::grid::NodeGrid;
use crate::solver::sqp::{
    cold_start, shift_solution, solve_to_convergence, sqp_step, IterationTelemetry, OcpInstance,
    ShootingSolution, SolverError, SolverSettings,
};

/// Solve mode of one planning call.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolveMode {
    /// Exactly one SQP step per call (real-time iteration).
    RealTimeIteration,
    /// Iterate to convergence (baseline).
    Converged,
}

/// Emitted plan: node times, trajectories, and Riccati feedback gains in the
/// full input space.
#[derive(Clone, Debug)]
pub struct Plan {
    pub times: Vec<f64>,
    pub x: Vec<DVector<f64>>,
    pub u: Vec<DVector<f64>>,
    pub gains: Vec<DMatrix<f64>>,
    /// Set when the line search rejected the step and the previous (shifted)
    /// plan was kept.
    pub stale: bool,
}

impl Plan {
    /// Input of the interval containing `t` (zero-order hold).
    pub fn input_at(&self, t: f64) -> &DVector<f64> {
        let n = self.u.len();
        for k in 0..n {
            if t < self.times[k + 1] - 1e-12 {
                return &self.u[k];
            }
        }
        &self.u[n - 1]
    }

    pub fn state_at(&self, t: f64) -> DVector<f64> {
        if t <= self.times[0] {
            return self.x[0].clone();
        }
        let n = self.u.len();
        for k in 0..n {
            if t <= self.times[k + 1] {
                let s = (t - self.times[k]) / (self.times[k + 1] - self.times[k]);
                return &self.x[k] * (1.0 - s) + &self.x[k + 1] * s;
            }
        }
        self.x[n].clone()
    }
}

/// Controller state carried across MPC iterations.
pub struct MpcController {
    pub setup: OcpSetup,
    pub settings: SolverSettings,
    pub horizon: f64,
    pub nominal_dt: f64,
    pub tau_dist: [f64; 6],
    region_params: RegionParams,
    region_cache: RegionCache,
    previous: Option<ShootingSolution>,
}

pub struct PlanOutcome {
    pub plan: Plan,
    pub telemetry: Vec<IterationTelemetry>,
    /// Iterations actually performed (1 for real-time iteration).
    pub iterations: usize,
    pub converged: bool,
}

impl MpcController {
    pub fn new(
        setup: OcpSetup,
        settings: SolverSettings,
        horizon: f64,
        nominal_dt: f64,
        region_params: RegionParams,
    ) -> Self {
        Self {
            setup,
            settings,
            horizon,
            nominal_dt,
            tau_dist: [0.0; 6],
            region_params,
            region_cache: RegionCache::default(),
            previous: None,
        }
    }

    pub fn reset(&mut self) {
        self.previous = None;
        self.region_cache = RegionCache::default();
    }

    /// Foothold region cached for a (leg, touchdown time) pair, if any.
    pub fn region_for_touchdown(
        &self,
        leg: usize,
        touchdown_time: f64,
    ) -> Option<&crate::ocp::FootholdRegion> {
        self.region_cache.get(leg, touchdown_time)
    }

    /// Build the gait-aligned grid and node data for one horizon.
    pub fn assemble_nodes(
        &mut self,
        t0: f64,
        reference: &MotionReference,
        planes: &[SegmentedPlane],
    ) -> (NodeGrid, Vec<NodeData>) {
        let switches = reference.gait.switch_times(t0, t0 + self.horizon);
        let grid = NodeGrid::new(t0, self.horizon, self.nominal_dt, &switches);
        let nodes = build_nodes(
            &self.setup.model,
            reference,
            planes,
            &grid.times,
            &self.region_params,
            &mut self.region_cache,
        );
        (grid, nodes)
    }

    /// One planning call: assemble, warm start, solve, emit the plan.
    pub fn plan(
        &mut self,
        t0: f64,
        measured: &RobotState,
        reference: &MotionReference,
        planes: &[SegmentedPlane],
        sdf: Option<&SignedDistanceField>,
        mode: SolveMode,
    ) -> Result<PlanOutcome, SolverError> {
        let (grid, nodes) = self.assemble_nodes(t0, reference, planes);
        let instance = OcpInstance {
            setup: &self.setup,
            nodes: &nodes,
            sdf,
            x_hat: DVector::from_row_slice(&measured.0),
            tau_dist: self.tau_dist,
            nominal_dt: self.nominal_dt,
        };
        let initial = match &self.previous {
            Some(prev) => shift_solution(&self.setup, prev, &nodes, &grid.times),
            None => cold_start(&self.setup, &nodes, &grid.times),
        };
        let (solution, telemetry, iterations, converged, stale, gains) = match mode {
            SolveMode::RealTimeIteration => {
                let outcome = sqp_step(&instance, &initial, &self.settings)?;
                let stale = !outcome.accepted;
                (
                    outcome.solution,
                    vec![outcome.telemetry],
                    1,
                    false,
                    stale,
                    outcome.gains,
                )
            }
            SolveMode::Converged => {
                let solved = solve_to_convergence(&instance, initial, &self.settings)?;
                (
                    solved.solution,
                    solved.telemetry,
                    solved.iterations,
                    solved.converged,
                    false,
                    solved.gains,
                )
            }
        };
        let plan = Plan {
            times: solution.times.clone(),
            x: solution.x.clone(),
            u: solution.u.clone(),
            gains,
            stale,
        };
        self.previous = Some(solution);
        Ok(PlanOutcome {
            plan,
            telemetry,
            iterations,
            converged,
        })
    }
}
