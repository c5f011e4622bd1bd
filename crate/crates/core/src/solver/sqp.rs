//! Multiple-shooting SQP with real-time iteration.
//!
//! One iteration: linear-quadratic approximation at the current iterate,
//! stagewise equality-constraint projection, a Riccati solve of the
//! projected QP, back substitution, and the filter line-search.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::ocp::{
    equality_constraints, equality_jacobians, stage_cost, stage_cost_quadratics, terminal_cost,
    terminal_cost_quadratics, NodeData, OcpSetup,
};
use crate::robot::{dynamics_with_jacobians, DynamicsError, DynamicsParams, NDIR, NU, NX};
use crate::sdf::SignedDistanceField;
use crate::solver::line_search::{
    filter_line_search, LineSearchBranch, LineSearchParams, LineSearchResult,
};
use crate::solver::riccati::{
    apply_projection, project_equalities, riccati_solve, LqProblem, LqStage, NodeProjection,
    QpError,
};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error("non-finite value encountered at node {0}")]
    NonFinite(usize),
}

#[derive(Clone, Debug)]
pub struct SolverSettings {
    pub max_iterations: usize,
    /// Convergence threshold on the step infinity norm.
    pub convergence_tolerance: f64,
    /// Diagonal floor added to control Hessian blocks before the Riccati
    /// factorization.
    pub regularization_floor: f64,
    /// Minimum singular value for the equality-constraint input Jacobian.
    pub rank_tolerance: f64,
    pub line_search: LineSearchParams,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            convergence_tolerance: 1e-6,
            regularization_floor: 1e-8,
            rank_tolerance: 1e-8,
            line_search: LineSearchParams::default(),
        }
    }
}

/// One frozen optimal control problem instance.
pub struct OcpInstance<'a> {
    pub setup: &'a OcpSetup,
    pub nodes: &'a [NodeData],
    pub sdf: Option<&'a SignedDistanceField>,
    /// Measured state pinned by the initial condition.
    pub x_hat: DVector<f64>,
    pub tau_dist: [f64; 6],
    /// Nominal spacing used by the constraint metric.
    pub nominal_dt: f64,
}

/// Multiple-shooting iterate: states at every node, inputs on every
/// interval, and the constraint multipliers of the last QP.
#[derive(Clone, Debug)]
pub struct ShootingSolution {
    pub times: Vec<f64>,
    pub x: Vec<DVector<f64>>,
    pub u: Vec<DVector<f64>>,
    pub multipliers_dyn: Vec<DVector<f64>>,
    pub multipliers_eq: Vec<DVector<f64>>,
}

impl ShootingSolution {
    pub fn intervals(&self) -> usize {
        self.u.len()
    }
}

/// Per-iteration telemetry record.
#[derive(Clone, Debug)]
pub struct IterationTelemetry {
    pub time: f64,
    pub cost: f64,
    pub theta: f64,
    pub dynamics_violation: f64,
    pub equality_violation: f64,
    pub alpha: f64,
    pub branch: LineSearchBranch,
    pub step_norm: f64,
    pub lq_ms: f64,
    pub qp_ms: f64,
    pub line_search_ms: f64,
    pub line_search_trials: usize,
}

struct NodeLq {
    stage: LqStage,
    projection: NodeProjection,
    gradient_x: DVector<f64>,
    gradient_u: DVector<f64>,
    g: DVector<f64>,
    gu: DMatrix<f64>,
    defect: DVector<f64>,
    cost: f64,
}

impl<'a> OcpInstance<'a> {
    pub fn intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    fn params_at(&self, k: usize) -> DynamicsParams {
        DynamicsParams {
            contacts: self.nodes[k].contacts,
            tau_dist: self.tau_dist,
        }
    }

    /// One explicit midpoint (RK2) step of the continuous dynamics under a
    /// zero-order-hold input.
    pub fn discrete_dynamics(
        &self,
        k: usize,
        x: &[f64],
        u: &[f64],
    ) -> Result<[f64; NX], DynamicsError> {
        let dt = self.nodes[k].dt;
        let params = self.params_at(k);
        rk2_step(self.setup, &params, x, u, dt)
    }

    /// RK2 step with exact Jacobians composed through both stages.
    pub fn discrete_dynamics_linearized(
        &self,
        k: usize,
        x: &[f64],
        u: &[f64],
    ) -> Result<([f64; NX], DMatrix<f64>, DMatrix<f64>), DynamicsError> {
        let dt = self.nodes[k].dt;
        let params = self.params_at(k);
        let xa: [f64; NX] = x.try_into().expect("state dimension");
        let ua: [f64; NU] = u.try_into().expect("input dimension");
        let (f1, j1x, j1u) = dynamics_with_jacobians(
            &self.setup.model,
            &self.setup.filter,
            &xa,
            &ua,
            &params,
        )?;
        let mut mid = xa;
        for i in 0..NX {
            mid[i] += 0.5 * dt * f1[i];
        }
        let (f2, j2x, j2u) = dynamics_with_jacobians(
            &self.setup.model,
            &self.setup.filter,
            &mid,
            &ua,
            &params,
        )?;
        let mut next = xa;
        for i in 0..NX {
            next[i] += dt * f2[i];
        }
        // A = I + dt J2x (I + dt/2 J1x); B = dt (J2x dt/2 J1u + J2u)
        let eye = DMatrix::<f64>::identity(NX, NX);
        let a = &eye + (&j2x * (&eye + &j1x * (0.5 * dt))) * dt;
        let b = (&j2x * &j1u * (0.5 * dt) + &j2u) * dt;
        Ok((next, a, b))
    }

    /// Nonlinear cost of the full iterate.
    pub fn cost(&self, sol: &ShootingSolution) -> f64 {
        let n = self.intervals();
        let stage_sum: f64 = (0..n)
            .into_par_iter()
            .map(|k| {
                let node = &self.nodes[k];
                node.dt
                    * stage_cost(
                        self.setup,
                        node,
                        self.sdf,
                        sol.x[k].as_slice(),
                        sol.u[k].as_slice(),
                    )
            })
            .collect::<Vec<_>>()
            .into_iter()
            .sum();
        stage_sum + terminal_cost(self.setup, &self.nodes[n], sol.x[n].as_slice())
    }

    /// Constraint metric pieces: returns `(theta, |F|, |G|)` with
    /// `theta = dt_nominal * |[F; G]|_2`.
    pub fn constraint_metric(&self, sol: &ShootingSolution) -> Result<(f64, f64, f64), DynamicsError> {
        let n = self.intervals();
        let per_node: Result<Vec<(f64, f64)>, DynamicsError> = (0..n)
            .into_par_iter()
            .map(|k| {
                let pred = self.discrete_dynamics(k, sol.x[k].as_slice(), sol.u[k].as_slice())?;
                let mut defect_sq = 0.0;
                for i in 0..NX {
                    let d = sol.x[k + 1][i] - pred[i];
                    defect_sq += d * d;
                }
                let g = equality_constraints(
                    self.setup,
                    &self.nodes[k],
                    sol.x[k].as_slice(),
                    sol.u[k].as_slice(),
                );
                Ok((defect_sq, g.norm_squared()))
            })
            .collect();
        let per_node = per_node?;
        let mut f_sq = (&sol.x[0] - &self.x_hat).norm_squared();
        let mut g_sq = 0.0;
        for (d, g) in per_node {
            f_sq += d;
            g_sq += g;
        }
        let theta = self.nominal_dt * (f_sq + g_sq).sqrt();
        Ok((theta, f_sq.sqrt(), g_sq.sqrt()))
    }

    fn build_lq(&self, sol: &ShootingSolution, settings: &SolverSettings) -> Result<Vec<NodeLq>, SolverError> {
        let n = self.intervals();
        (0..n)
            .into_par_iter()
            .map(|k| {
                let node = &self.nodes[k];
                let x = sol.x[k].as_slice();
                let u = sol.u[k].as_slice();
                let (cost, grad, hess) =
                    stage_cost_quadratics(self.setup, node, self.sdf, x, u);
                let (pred, a, b) = self
                    .discrete_dynamics_linearized(k, x, u)
                    .map_err(SolverError::Dynamics)?;
                let defect = DVector::from_fn(NX, |i, _| pred[i] - sol.x[k + 1][i]);
                let (g, gx, gu) = equality_jacobians(self.setup, node, x, u);
                if !cost.is_finite() || !defect.iter().all(|v| v.is_finite()) {
                    return Err(SolverError::NonFinite(k));
                }
                let dt = node.dt;
                let qxx = hess.view((0, 0), (NX, NX)).into_owned() * dt;
                let quu = hess.view((NX, NX), (NU, NU)).into_owned() * dt;
                let qux = hess.view((NX, 0), (NU, NX)).into_owned() * dt;
                let qx = grad.rows(0, NX).into_owned() * dt;
                let qu = grad.rows(NX, NU).into_owned() * dt;
                let stage = LqStage {
                    a,
                    b,
                    f: defect.clone(),
                    qxx,
                    quu,
                    qux,
                    qx: qx.clone(),
                    qu: qu.clone(),
                };
                let projection =
                    project_equalities(k, &g, &gx, &gu, settings.rank_tolerance)
                        .map_err(SolverError::Qp)?;
                Ok(NodeLq {
                    stage,
                    projection,
                    gradient_x: qx,
                    gradient_u: qu,
                    g,
                    gu,
                    defect,
                    cost: cost * dt,
                })
            })
            .collect()
    }
}

fn rk2_step(
    setup: &OcpSetup,
    params: &DynamicsParams,
    x: &[f64],
    u: &[f64],
    dt: f64,
) -> Result<[f64; NX], DynamicsError> {
    let xa: [f64; NX] = x.try_into().expect("state dimension");
    let ua: [f64; NU] = u.try_into().expect("input dimension");
    let f1 = crate::robot::continuous_dynamics(&setup.model, &setup.filter, &xa, &ua, params)?;
    let mut mid = xa;
    for i in 0..NX {
        mid[i] += 0.5 * dt * f1[i];
    }
    let f2 = crate::robot::continuous_dynamics(&setup.model, &setup.filter, &mid, &ua, params)?;
    let mut next = xa;
    for i in 0..NX {
        next[i] += dt * f2[i];
    }
    Ok(next)
}

/// Result of one SQP step.
pub struct StepOutcome {
    pub solution: ShootingSolution,
    pub telemetry: IterationTelemetry,
    pub step_norm: f64,
    pub accepted: bool,
    /// Riccati feedback gains mapped back to the full input space.
    pub gains: Vec<DMatrix<f64>>,
}

/// One full SQP iteration: LQ approximation, projection, Riccati solve, back
/// substitution, and the filter line-search.
pub fn sqp_step(
    instance: &OcpInstance,
    solution: &ShootingSolution,
    settings: &SolverSettings,
) -> Result<StepOutcome, SolverError> {
    let n = instance.intervals();
    let t_lq = Instant::now();
    let lq = instance.build_lq(solution, settings)?;
    let (term_cost, term_grad, term_hess) = terminal_cost_quadratics(
        instance.setup,
        &instance.nodes[n],
        solution.x[n].as_slice(),
    );
    let lq_ms = t_lq.elapsed().as_secs_f64() * 1e3;

    let t_qp = Instant::now();
    let projected: Vec<LqStage> = lq
        .par_iter()
        .map(|node| apply_projection(&node.stage, &node.projection))
        .collect();
    let problem = LqProblem {
        stages: projected,
        terminal_qxx: term_hess,
        terminal_qx: term_grad.clone(),
        dx0: &instance.x_hat - &solution.x[0],
    };
    let qp = riccati_solve(&problem, settings.regularization_floor)?;
    // back substitution into the full input space
    let mut du = Vec::with_capacity(n);
    let mut gains = Vec::with_capacity(n);
    for k in 0..n {
        let proj = &lq[k].projection;
        let full = &proj.p0 + &proj.e * &qp.dx[k] + &proj.p * &qp.du[k];
        du.push(full);
        gains.push(&proj.e + &proj.p * &qp.gains[k]);
    }
    // multipliers: dynamics costate and the equality multipliers from input
    // stationarity
    let mut mult_eq = Vec::with_capacity(n);
    for k in 0..n {
        let node = &lq[k];
        let ng = node.g.len();
        if ng == 0 {
            mult_eq.push(DVector::zeros(0));
            continue;
        }
        let stat = &node.gradient_u
            + &node.stage.quu * &du[k]
            + &node.stage.qux * &qp.dx[k]
            + node.stage.b.transpose() * &qp.costate[k];
        // gu^T mult = -stat in least squares sense
        let mult = -(node.gu.clone() * node.gu.transpose())
            .lu()
            .solve(&(node.gu.clone() * stat))
            .unwrap_or_else(|| DVector::zeros(ng));
        mult_eq.push(mult);
    }
    let qp_ms = t_qp.elapsed().as_secs_f64() * 1e3;

    // line search on the nonlinear problem
    let t_ls = Instant::now();
    let phi0: f64 = lq.iter().map(|n| n.cost).sum::<f64>() + term_cost;
    let mut constraint_sq = (&instance.x_hat - &solution.x[0]).norm_squared();
    for node in &lq {
        constraint_sq += node.defect.norm_squared() + node.g.norm_squared();
    }
    let theta0 = instance.nominal_dt * constraint_sq.sqrt();
    let mut grad_dot = term_grad.dot(&qp.dx[n]);
    for k in 0..n {
        grad_dot += lq[k].gradient_x.dot(&qp.dx[k]) + lq[k].gradient_u.dot(&du[k]);
    }
    let mut step_norm: f64 = 0.0;
    for k in 0..=n {
        step_norm = step_norm.max(qp.dx[k].amax());
    }
    for item in &du {
        step_norm = step_norm.max(item.amax());
    }

    let trial = |alpha: f64| -> (f64, f64) {
        let mut candidate = solution.clone();
        for k in 0..=n {
            candidate.x[k] += alpha * &qp.dx[k];
        }
        for k in 0..n {
            candidate.u[k] += alpha * &du[k];
        }
        match instance.constraint_metric(&candidate) {
            Ok((theta, _, _)) => {
                let phi = instance.cost(&candidate);
                if phi.is_finite() && theta.is_finite() {
                    (phi, theta)
                } else {
                    (f64::INFINITY, f64::INFINITY)
                }
            }
            Err(_) => (f64::INFINITY, f64::INFINITY),
        }
    };
    let ls: LineSearchResult =
        filter_line_search(&settings.line_search, phi0, theta0, grad_dot, trial);
    let line_search_ms = t_ls.elapsed().as_secs_f64() * 1e3;

    let mut next = solution.clone();
    if ls.accepted {
        for k in 0..=n {
            next.x[k] += ls.alpha * &qp.dx[k];
        }
        for k in 0..n {
            next.u[k] += ls.alpha * &du[k];
        }
        next.multipliers_dyn = qp.costate.clone();
        next.multipliers_eq = mult_eq;
    }
    let (theta_after, f_norm, g_norm) = instance.constraint_metric(&next).unwrap_or((
        f64::INFINITY,
        f64::INFINITY,
        f64::INFINITY,
    ));
    let cost_after = instance.cost(&next);
    let telemetry = IterationTelemetry {
        time: instance.nodes[0].t,
        cost: cost_after,
        theta: theta_after,
        dynamics_violation: instance.nominal_dt * f_norm,
        equality_violation: instance.nominal_dt * g_norm,
        alpha: if ls.accepted { ls.alpha } else { 0.0 },
        branch: ls.branch,
        step_norm,
        lq_ms,
        qp_ms,
        line_search_ms,
        line_search_trials: ls.trials,
    };
    Ok(StepOutcome {
        solution: next,
        telemetry,
        step_norm,
        accepted: ls.accepted,
        gains,
    })
}

/// Outcome of an iterated solve.
pub struct ConvergedSolve {
    pub solution: ShootingSolution,
    pub iterations: usize,
    pub converged: bool,
    pub final_theta: f64,
    pub final_cost: f64,
    pub telemetry: Vec<IterationTelemetry>,
    pub gains: Vec<DMatrix<f64>>,
}

/// Repeat SQP steps on a frozen problem until the step norm drops below the
/// tolerance or the iteration budget is exhausted. Non-convergence is
/// reported, not an error.
pub fn solve_to_convergence(
    instance: &OcpInstance,
    initial: ShootingSolution,
    settings: &SolverSettings,
) -> Result<ConvergedSolve, SolverError> {
    let mut solution = initial;
    let mut telemetry = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut gains = Vec::new();
    for _ in 0..settings.max_iterations {
        let outcome = sqp_step(instance, &solution, settings)?;
        iterations += 1;
        solution = outcome.solution;
        gains = outcome.gains;
        let effective_step = if outcome.accepted {
            outcome.telemetry.alpha * outcome.step_norm
        } else {
            0.0
        };
        telemetry.push(outcome.telemetry);
        if outcome.accepted && effective_step <= settings.convergence_tolerance {
            converged = true;
            break;
        }
        if !outcome.accepted {
            break;
        }
    }
    let (final_theta, _, _) = instance
        .constraint_metric(&solution)
        .unwrap_or((f64::INFINITY, 0.0, 0.0));
    let final_cost = instance.cost(&solution);
    Ok(ConvergedSolve {
        solution,
        iterations,
        converged,
        final_theta,
        final_cost,
        telemetry,
        gains,
    })
}

/// Cold-start iterate from the per-node references.
pub fn cold_start(setup: &OcpSetup, nodes: &[NodeData], times: &[f64]) -> ShootingSolution {
    let n = times.len() - 1;
    let x = nodes
        .iter()
        .map(|node| {
            let xr = crate::ocp::reference_state(&setup.filter, node);
            DVector::from_row_slice(&xr)
        })
        .collect();
    ShootingSolution {
        times: times.to_vec(),
        x,
        u: vec![DVector::zeros(NU); n],
        multipliers_dyn: Vec::new(),
        multipliers_eq: Vec::new(),
    }
}

/// Warm start: interpolate the previous solution onto the new grid, repeat
/// the final state for fresh horizon tail nodes, and derive tail inputs from
/// the reference outputs.
pub fn shift_solution(
    setup: &OcpSetup,
    previous: &ShootingSolution,
    nodes: &[NodeData],
    times: &[f64],
) -> ShootingSolution {
    let n = times.len() - 1;
    let prev_end = *previous.times.last().unwrap();
    let x: Vec<DVector<f64>> = times
        .iter()
        .map(|&t| interp_state(previous, t))
        .collect();
    let mut u = Vec::with_capacity(n);
    for k in 0..n {
        let t = times[k];
        if t < prev_end - 1e-9 {
            u.push(previous.u[interval_of(&previous.times, t)].clone());
        } else {
            // tail: inputs reproducing the reference outputs given the
            // current filter states
            let node = &nodes[k];
            let filter = &setup.filter;
            let mut nu = DVector::zeros(NU);
            for leg in 0..4 {
                for i in 0..3 {
                    let s_l = x[k][24 + 3 * leg + i];
                    let lam_ref = node.lambda_ref_body[leg][i];
                    nu[3 * leg + i] = (lam_ref - filter.c_lambda * s_l) / filter.d_lambda;
                    let s_j = x[k][36 + 3 * leg + i];
                    nu[12 + 3 * leg + i] = -filter.c_j * s_j / filter.d_j;
                }
            }
            u.push(nu);
        }
    }
    ShootingSolution {
        times: times.to_vec(),
        x,
        u,
        multipliers_dyn: Vec::new(),
        multipliers_eq: Vec::new(),
    }
}

fn interval_of(times: &[f64], t: f64) -> usize {
    let n = times.len() - 1;
    for k in 0..n {
        if t < times[k + 1] - 1e-12 {
            return k;
        }
    }
    n - 1
}

fn interp_state(sol: &ShootingSolution, t: f64) -> DVector<f64> {
    let times = &sol.times;
    if t <= times[0] {
        return sol.x[0].clone();
    }
    if t >= *times.last().unwrap() {
        return sol.x.last().unwrap().clone();
    }
    let k = interval_of(times, t);
    let s = (t - times[k]) / (times[k + 1] - times[k]);
    &sol.x[k] * (1.0 - s) + &sol.x[k + 1] * s
}
