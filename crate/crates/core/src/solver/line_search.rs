//! Backtracking filter line-search.
//!
//! A step is accepted when it reduces either the cost or the constraint
//! violation, never a weighted merit of the two. At high violation only
//! constraint progress counts; at very low violation a descent direction
//! must satisfy the Armijo condition.

/// Acceptance branch of the filter line-search.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LineSearchBranch {
    /// High-violation branch: constraint norm decreased.
    Constraint,
    /// Low-violation branch: Armijo decrease of the cost.
    Armijo,
    /// Either the cost or the constraint norm decreased.
    CostOrConstraint,
    /// No step size down to `alpha_min` was acceptable.
    Rejected,
}

impl LineSearchBranch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Constraint => "constraint",
            Self::Armijo => "armijo",
            Self::CostOrConstraint => "cost_or_constraint",
            Self::Rejected => "rejected",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LineSearchParams {
    pub alpha_min: f64,
    pub theta_max: f64,
    pub theta_min: f64,
    pub eta: f64,
    pub gamma_phi: f64,
    pub gamma_theta: f64,
    pub gamma_alpha: f64,
}

impl Default for LineSearchParams {
    fn default() -> Self {
        Self {
            alpha_min: 1e-4,
            theta_max: 1e-2,
            theta_min: 1e-6,
            eta: 1e-4,
            gamma_phi: 1e-6,
            gamma_theta: 1e-6,
            gamma_alpha: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LineSearchResult {
    pub alpha: f64,
    pub branch: LineSearchBranch,
    pub accepted: bool,
    pub phi: f64,
    pub theta: f64,
    /// Number of trial evaluations.
    pub trials: usize,
}

/// Run the backtracking filter line-search.
///
/// `evaluate(alpha)` returns `(phi, theta)` at `w + alpha dw`;
/// `grad_phi_dot_dw` is the directional derivative of the nonlinear cost
/// along the step. On rejection, `phi`/`theta` hold the unstepped values.
pub fn filter_line_search(
    params: &LineSearchParams,
    phi0: f64,
    theta0: f64,
    grad_phi_dot_dw: f64,
    mut evaluate: impl FnMut(f64) -> (f64, f64),
) -> LineSearchResult {
    let mut alpha = 1.0;
    let mut trials = 0;
    while alpha >= params.alpha_min {
        let (phi_new, theta_new) = evaluate(alpha);
        trials += 1;
        let branch = if theta_new > params.theta_max {
            if theta_new < (1.0 - params.gamma_theta) * theta0 {
                Some(LineSearchBranch::Constraint)
            } else {
                None
            }
        } else if theta_new.max(theta0) < params.theta_min && grad_phi_dot_dw < 0.0 {
            if phi_new < phi0 + params.eta * alpha * grad_phi_dot_dw {
                Some(LineSearchBranch::Armijo)
            } else {
                None
            }
        } else if phi_new < phi0 - params.gamma_phi * theta0
            || theta_new < (1.0 - params.gamma_theta) * theta0
        {
            Some(LineSearchBranch::CostOrConstraint)
        } else {
            None
        };
        if let Some(branch) = branch {
            return LineSearchResult {
                alpha,
                branch,
                accepted: true,
                phi: phi_new,
                theta: theta_new,
                trials,
            };
        }
        alpha *= params.gamma_alpha;
    }
    LineSearchResult {
        alpha: 0.0,
        branch: LineSearchBranch::Rejected,
        accepted: false,
        phi: phi0,
        theta: theta0,
        trials,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn high_violation_accepts_constraint_progress_at_full_step() {
        // theta_0 above theta_max, the full step halves theta
        let params = LineSearchParams::default();
        let theta0 = 0.05;
        let result = filter_line_search(&params, 10.0, theta0, 5.0, |alpha| {
            (10.0 + alpha, theta0 * (1.0 - 0.5 * alpha))
        });
        assert!(result.accepted);
        assert_eq!(result.alpha, 1.0);
        assert_eq!(result.branch, LineSearchBranch::Constraint);
    }

    #[test]
    fn low_violation_uses_armijo() {
        // smooth convex quadratic near the optimum, negligible violation
        let params = LineSearchParams::default();
        let phi = |a: f64| (1.0 - a) * (1.0 - a); // minimum at alpha = 1
        let grad_dot = -2.0;
        let result = filter_line_search(&params, phi(0.0), 1e-9, grad_dot, |alpha| {
            (phi(alpha), 1e-9)
        });
        assert!(result.accepted);
        assert_eq!(result.branch, LineSearchBranch::Armijo);
        assert_eq!(result.alpha, 1.0);
    }

    #[test]
    fn dual_branch_accepts_cost_decrease_at_moderate_violation() {
        let params = LineSearchParams::default();
        let theta0 = 1e-3; // between theta_min and theta_max
        let result = filter_line_search(&params, 5.0, theta0, -1.0, |alpha| {
            (5.0 - 0.1 * alpha, theta0) // cost improves, violation unchanged
        });
        assert!(result.accepted);
        assert_eq!(result.branch, LineSearchBranch::CostOrConstraint);
        assert_eq!(result.alpha, 1.0);
    }

    #[test]
    fn dual_branch_accepts_constraint_decrease_despite_cost_increase() {
        let params = LineSearchParams::default();
        let theta0 = 5e-3;
        let result = filter_line_search(&params, 5.0, theta0, 1.0, |alpha| {
            (5.0 + alpha, theta0 * (1.0 - 0.9 * alpha))
        });
        assert!(result.accepted);
        assert_eq!(result.branch, LineSearchBranch::CostOrConstraint);
    }

    #[test]
    fn adversarial_direction_is_rejected_with_fallback() {
        let params = LineSearchParams::default();
        let theta0 = 1e-3;
        let result = filter_line_search(&params, 5.0, theta0, 1.0, |alpha| {
            (5.0 + alpha, theta0 * (1.0 + alpha))
        });
        assert!(!result.accepted);
        assert_eq!(result.branch, LineSearchBranch::Rejected);
        assert_eq!(result.phi, 5.0);
        assert_eq!(result.theta, theta0);
        // backtracked all the way: 1, 1/2, ..., down to alpha_min = 1e-4
        assert_eq!(result.trials, 14);
    }

    #[test]
    fn backtracks_until_acceptable() {
        let params = LineSearchParams::default();
        let theta0 = 5e-3;
        // constraint violation explodes for alpha > 1/4, shrinks below
        let result = filter_line_search(&params, 1.0, theta0, -1.0, |alpha| {
            if alpha > 0.26 {
                (1.0 + alpha, theta0 * 10.0)
            } else {
                (1.0, theta0 * (1.0 - alpha))
            }
        });
        assert!(result.accepted);
        assert_eq!(result.alpha, 0.25);
        assert_eq!(result.branch, LineSearchBranch::CostOrConstraint);
        assert_eq!(result.trials, 3);
    }
}
