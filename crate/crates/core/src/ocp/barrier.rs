//! Relaxed logarithmic barrier.
//!
//! Log-barrier on the interior, switching to a quadratic extension below the
//! relaxation threshold `delta`, so the penalty is defined for infeasible
//! points. Value and first derivative are continuous at the switch; the
//! second derivative is continuous as well, which keeps the SCQP Hessian
//! well behaved.

/// Penalty value.
pub fn relaxed_barrier(h: f64, mu: f64, delta: f64) -> f64 {
    if h >= delta {
        -mu * h.ln()
    } else {
        let r = (h - 2.0 * delta) / delta;
        0.5 * mu * (r * r - 1.0) - mu * delta.ln()
    }
}

/// First derivative with respect to `h`.
pub fn relaxed_barrier_d1(h: f64, mu: f64, delta: f64) -> f64 {
    if h >= delta {
        -mu / h
    } else {
        mu * (h - 2.0 * delta) / (delta * delta)
    }
}

/// Second derivative with respect to `h`; positive everywhere.
pub fn relaxed_barrier_d2(h: f64, mu: f64, delta: f64) -> f64 {
    if h >= delta {
        mu / (h * h)
    } else {
        mu / (delta * delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn both_branches_agree_at_the_switch() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let mu = rng.random_range(1e-4..1.0);
            let delta = rng.random_range(1e-4..2.0);
            let log_val = -mu * (delta as f64).ln();
            let r = (delta - 2.0 * delta) / delta;
            let quad_val = 0.5 * mu * (r * r - 1.0) - mu * delta.ln();
            assert!((log_val - quad_val).abs() <= 1e-12 * (1.0 + log_val.abs()));
            let log_d1 = -mu / delta;
            let quad_d1 = mu * (delta - 2.0 * delta) / (delta * delta);
            assert!((log_d1 - quad_d1).abs() <= 1e-12 * (1.0 + log_d1.abs()));
        }
    }

    #[test]
    fn interior_value_is_plain_log() {
        assert_eq!(relaxed_barrier(1.0, 0.01, 0.001), 0.0);
        let v = relaxed_barrier(0.5, 0.01, 0.001);
        assert!((v - (-0.01 * 0.5f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_finite_differences_across_the_switch() {
        let (mu, delta) = (0.02, 0.05);
        let h_eps = 1e-7;
        for h in [-0.2, 0.0, 0.02, 0.05, 0.3, 2.0] {
            let fd1 = (relaxed_barrier(h + h_eps, mu, delta)
                - relaxed_barrier(h - h_eps, mu, delta))
                / (2.0 * h_eps);
            assert!((fd1 - relaxed_barrier_d1(h, mu, delta)).abs() < 1e-6);
            let fd2 = (relaxed_barrier_d1(h + h_eps, mu, delta)
                - relaxed_barrier_d1(h - h_eps, mu, delta))
                / (2.0 * h_eps);
            assert!((fd2 - relaxed_barrier_d2(h, mu, delta)).abs() < 1e-5);
        }
    }

    #[test]
    fn defined_and_convex_for_infeasible_values() {
        let (mu, delta) = (0.01, 0.001);
        let mut prev = relaxed_barrier(-1.0, mu, delta);
        for k in 1..100 {
            let h = -1.0 + k as f64 * 0.005;
            let v = relaxed_barrier(h, mu, delta);
            assert!(v.is_finite());
            assert!(v < prev, "penalty must decrease toward feasibility");
            prev = v;
            assert!(relaxed_barrier_d2(h, mu, delta) > 0.0);
        }
    }
}
