//! Scalar-generic math utilities shared by the dynamics and cost evaluators.
//!
//! Model quantities (kinematics, dynamics, costs, constraints) are written
//! once, generic over [`Real`], and evaluated either with `f64` or with the
//! forward-mode dual number [`Dual`] to obtain exact first derivatives.

mod dual;
mod linear;
mod rotation;

pub use dual::Dual;
pub use linear::{
    m3_add, m3_identity, m3_mul, m3_mul_v3, m3_scale, m3_tr_mul_v3, m3_transpose, m3_zero,
    m6_mul_v6, m6_solve_spd, m6_zero, v3, v3_add, v3_cross, v3_dot, v3_norm, v3_scale, v3_sub,
    v3_zero, Mat3, Mat6, Vec3, Vec6,
};
pub use rotation::{
    euler_rate_map, rotation_log, rotation_zyx, rx, ry, rz, skew, EulerZyx,
};

/// Scalar abstraction for forward-mode differentiation.
///
/// Only the operations actually used by the model evaluators are included.
/// Branch decisions must be made on [`Real::val`], never on derivative parts.
pub trait Real:
    Copy
    + core::ops::Add<Output = Self>
    + core::ops::Sub<Output = Self>
    + core::ops::Mul<Output = Self>
    + core::ops::Div<Output = Self>
    + core::ops::Neg<Output = Self>
{
    fn constant(v: f64) -> Self;
    /// Value part (derivative-free), used for branching and diagnostics.
    fn val(self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tan(self) -> Self;
    fn sqrt(self) -> Self;
    fn atan2(self, x: Self) -> Self;
    fn ln(self) -> Self;
    fn abs(self) -> Self {
        if self.val() < 0.0 {
            -self
        } else {
            self
        }
    }
    fn zero() -> Self {
        Self::constant(0.0)
    }
    fn one() -> Self {
        Self::constant(1.0)
    }
}

impl Real for f64 {
    #[inline]
    fn constant(v: f64) -> Self {
        v
    }
    #[inline]
    fn val(self) -> f64 {
        self
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn tan(self) -> Self {
        f64::tan(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn atan2(self, x: Self) -> Self {
        f64::atan2(self, x)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
}
