//! Equality-constraint projection and the Riccati-based solve of the
//! projected LQ subproblem.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QpError {
    #[error("degenerate equality constraint at node {node}: min singular value {sigma}")]
    DegenerateConstraint { node: usize, sigma: f64 },
    #[error("control Hessian not positive definite at node {node}")]
    IndefiniteHessian { node: usize },
}

/// One stage of a linear-quadratic optimal control problem:
/// dynamics `dx' = A dx + B du + f`, cost
/// `0.5 dx'Qxx dx + 0.5 du'Quu du + du'Qux dx + qx'dx + qu'du`.
#[derive(Clone, Debug)]
pub struct LqStage {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub f: DVector<f64>,
    pub qxx: DMatrix<f64>,
    pub quu: DMatrix<f64>,
    pub qux: DMatrix<f64>,
    pub qx: DVector<f64>,
    pub qu: DVector<f64>,
}

/// LQ problem over `N` stages with a quadratic terminal cost and a fixed
/// initial deviation.
#[derive(Clone, Debug)]
pub struct LqProblem {
    pub stages: Vec<LqStage>,
    pub terminal_qxx: DMatrix<f64>,
    pub terminal_qx: DVector<f64>,
    pub dx0: DVector<f64>,
}

/// Riccati solution: state/input updates, feedback gains, and the dynamics
/// costate.
#[derive(Clone, Debug)]
pub struct RiccatiSolution {
    pub dx: Vec<DVector<f64>>,
    pub du: Vec<DVector<f64>>,
    pub gains: Vec<DMatrix<f64>>,
    pub feedforward: Vec<DVector<f64>>,
    /// Costate of the dynamics constraints at nodes 1..=N.
    pub costate: Vec<DVector<f64>>,
}

/// Backward Riccati sweep and forward rollout of the linear model.
///
/// `reg_floor` is added to the control Hessian diagonal before
/// factorization; a Cholesky failure afterwards is an error.
pub fn riccati_solve(problem: &LqProblem, reg_floor: f64) -> Result<RiccatiSolution, QpError> {
    let n = problem.stages.len();
    let mut s_mat = problem.terminal_qxx.clone();
    // keep symmetric against accumulation drift
    s_mat = (&s_mat + s_mat.transpose()) * 0.5;
    let mut s_vec = problem.terminal_qx.clone();
    let mut gains = vec![DMatrix::<f64>::zeros(0, 0); n];
    let mut feedforward = vec![DVector::<f64>::zeros(0); n];
    let mut value_mats = vec![DMatrix::<f64>::zeros(0, 0); n + 1];
    let mut value_vecs = vec![DVector::<f64>::zeros(0); n + 1];
    value_mats[n] = s_mat.clone();
    value_vecs[n] = s_vec.clone();
    for k in (0..n).rev() {
        let st = &problem.stages[k];
        let nu = st.b.ncols();
        let sa = &s_mat * &st.a;
        let sb = &s_mat * &st.b;
        let sf = &s_mat * &st.f + &s_vec;
        let mut h_uu = &st.quu + st.b.transpose() * &sb;
        for i in 0..nu {
            h_uu[(i, i)] += reg_floor;
        }
        let h_ux = &st.qux + st.b.transpose() * &sa;
        let h_u = &st.qu + st.b.transpose() * &sf;
        let chol = (&h_uu + h_uu.transpose()).scale(0.5).cholesky();
        let Some(chol) = chol else {
            return Err(QpError::IndefiniteHessian { node: k });
        };
        let gain = -chol.solve(&h_ux);
        let ff = -chol.solve(&h_u);
        // S_k = H_xx + H_ux^T K, s_k = h_x + H_ux^T kff
        let h_xx = &st.qxx + st.a.transpose() * &sa;
        let h_x = &st.qx + st.a.transpose() * &sf;
        s_mat = &h_xx + h_ux.transpose() * &gain;
        s_mat = (&s_mat + s_mat.transpose()) * 0.5;
        s_vec = &h_x + h_ux.transpose() * &ff;
        gains[k] = gain;
        feedforward[k] = ff;
        value_mats[k] = s_mat.clone();
        value_vecs[k] = s_vec.clone();
    }
    // forward rollout
    let mut dx = Vec::with_capacity(n + 1);
    let mut du = Vec::with_capacity(n);
    let mut costate = Vec::with_capacity(n);
    dx.push(problem.dx0.clone());
    for k in 0..n {
        let st = &problem.stages[k];
        let u = &feedforward[k] + &gains[k] * &dx[k];
        let next = &st.a * &dx[k] + &st.b * &u + &st.f;
        costate.push(&value_mats[k + 1] * &next + &value_vecs[k + 1]);
        dx.push(next);
        du.push(u);
    }
    Ok(RiccatiSolution {
        dx,
        du,
        gains,
        feedforward,
        costate,
    })
}

/// Change of variables eliminating the stagewise equality constraints:
/// `du = p0 + E dx + P dz` with `P` an orthonormal null-space basis of the
/// input Jacobian.
#[derive(Clone, Debug)]
pub struct NodeProjection {
    pub p: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub p0: DVector<f64>,
    /// Right pseudo-inverse of the input Jacobian (for multipliers).
    pub gu_pinv: DMatrix<f64>,
}

impl NodeProjection {
    pub fn identity(nu: usize) -> Self {
        Self {
            p: DMatrix::identity(nu, nu),
            e: DMatrix::zeros(nu, 0),
            p0: DVector::zeros(nu),
            gu_pinv: DMatrix::zeros(nu, 0),
        }
    }
}

/// Build the projection from the constraint values and Jacobians; the input
/// Jacobian must have full row rank.
pub fn project_equalities(
    node: usize,
    g: &DVector<f64>,
    gx: &DMatrix<f64>,
    gu: &DMatrix<f64>,
    rank_tol: f64,
) -> Result<NodeProjection, QpError> {
    let ng = g.len();
    let nu = gu.ncols();
    if ng == 0 {
        let mut proj = NodeProjection::identity(nu);
        proj.e = DMatrix::zeros(nu, gx.ncols());
        return Ok(proj);
    }
    let sigmas = gu.clone().singular_values();
    let min_sigma = sigmas.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min_sigma >= rank_tol) || ng > nu {
        return Err(QpError::DegenerateConstraint {
            node,
            sigma: min_sigma,
        });
    }
    // right pseudo-inverse gu^+ = gu^T (gu gu^T)^{-1}
    let gugt = gu * gu.transpose();
    let gugt_inv = gugt
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .unwrap_or_else(|| gugt.try_inverse().expect("full row rank established"));
    let gu_pinv = gu.transpose() * gugt_inv;
    // orthonormal null-space basis from the projector I - gu^+ gu
    let projector = DMatrix::<f64>::identity(nu, nu) - &gu_pinv * gu;
    let eig = projector.symmetric_eigen();
    let mut cols: Vec<usize> = (0..nu).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
    cols.sort_unstable();
    debug_assert_eq!(cols.len(), nu - ng);
    let mut p = DMatrix::<f64>::zeros(nu, nu - ng);
    for (j, &c) in cols.iter().enumerate() {
        p.column_mut(j).copy_from(&eig.eigenvectors.column(c));
    }
    let e = -&gu_pinv * gx;
    let p0 = -&gu_pinv * g;
    Ok(NodeProjection { p, e, p0, gu_pinv })
}

/// Substitute the projection into one LQ stage.
pub fn apply_projection(stage: &LqStage, proj: &NodeProjection) -> LqStage {
    let a = &stage.a + &stage.b * &proj.e;
    let b = &stage.b * &proj.p;
    let f = &stage.f + &stage.b * &proj.p0;
    let quu_e = &stage.quu * &proj.e;
    let qxx = &stage.qxx
        + proj.e.transpose() * &stage.qux
        + stage.qux.transpose() * &proj.e
        + proj.e.transpose() * &quu_e;
    let qux = proj.p.transpose() * (&stage.qux + &quu_e);
    let quu = proj.p.transpose() * &stage.quu * &proj.p;
    let qu_shift = &stage.qu + &stage.quu * &proj.p0;
    let qx = &stage.qx + stage.qux.transpose() * &proj.p0 + proj.e.transpose() * &qu_shift;
    let qu = proj.p.transpose() * &qu_shift;
    LqStage {
        a,
        b,
        f,
        qxx,
        quu,
        qux,
        qx,
        qu,
    }
}
