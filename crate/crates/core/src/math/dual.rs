//! Forward-mode dual numbers with a fixed number of derivative directions.

use super::Real;

/// Dual number carrying `N` simultaneous partial derivatives.
///
/// Seeding `d[i] = 1` for variable `i` and evaluating a scalar-generic
/// function yields the value together with one full gradient row in a single
/// pass.
#[derive(Clone, Copy, Debug)]
pub struct Dual<const N: usize> {
    pub v: f64,
    pub d: [f64; N],
}

impl<const N: usize> Dual<N> {
    #[inline]
    pub fn new(v: f64) -> Self {
        Self { v, d: [0.0; N] }
    }

    /// Variable with derivative 1 in direction `idx`.
    #[inline]
    pub fn var(v: f64, idx: usize) -> Self {
        let mut d = [0.0; N];
        d[idx] = 1.0;
        Self { v, d }
    }
}

impl<const N: usize> core::ops::Add for Dual<N> {
    type Output = Self;
    #[inline]
    fn add(mut self, rhs: Self) -> Self {
        self.v += rhs.v;
        for i in 0..N {
            self.d[i] += rhs.d[i];
        }
        self
    }
}

impl<const N: usize> core::ops::Sub for Dual<N> {
    type Output = Self;
    #[inline]
    fn sub(mut self, rhs: Self) -> Self {
        self.v -= rhs.v;
        for i in 0..N {
            self.d[i] -= rhs.d[i];
        }
        self
    }
}

impl<const N: usize> core::ops::Mul for Dual<N> {
    type Output = Self;
    #[inline]
    fn mul(self, rhs: Self) -> Self {
        let mut d = [0.0; N];
        for i in 0..N {
            d[i] = self.d[i] * rhs.v + self.v * rhs.d[i];
        }
        Self {
            v: self.v * rhs.v,
            d,
        }
    }
}

impl<const N: usize> core::ops::Div for Dual<N> {
    type Output = Self;
    #[inline]
    fn div(self, rhs: Self) -> Self {
        let inv = 1.0 / rhs.v;
        let v = self.v * inv;
        let mut d = [0.0; N];
        for i in 0..N {
            d[i] = (self.d[i] - v * rhs.d[i]) * inv;
        }
        Self { v, d }
    }
}

impl<const N: usize> core::ops::Neg for Dual<N> {
    type Output = Self;
    #[inline]
    fn neg(mut self) -> Self {
        self.v = -self.v;
        for i in 0..N {
            self.d[i] = -self.d[i];
        }
        self
    }
}

impl<const N: usize> Real for Dual<N> {
    #[inline]
    fn constant(v: f64) -> Self {
        Self::new(v)
    }

    #[inline]
    fn val(self) -> f64 {
        self.v
    }

    fn sin(self) -> Self {
        self.chain(self.v.sin(), self.v.cos())
    }

    fn cos(self) -> Self {
        self.chain(self.v.cos(), -self.v.sin())
    }

    fn tan(self) -> Self {
        let c = self.v.cos();
        self.chain(self.v.tan(), 1.0 / (c * c))
    }

    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s)
    }

    fn atan2(self, x: Self) -> Self {
        // d atan2(y, x) = (x dy - y dx) / (x^2 + y^2)
        let denom = self.v * self.v + x.v * x.v;
        let mut d = [0.0; N];
        for i in 0..N {
            d[i] = (x.v * self.d[i] - self.v * x.d[i]) / denom;
        }
        Self {
            v: self.v.atan2(x.v),
            d,
        }
    }

    fn ln(self) -> Self {
        self.chain(self.v.ln(), 1.0 / self.v)
    }
}

impl<const N: usize> Dual<N> {
    #[inline]
    fn chain(self, v: f64, dv: f64) -> Self {
        let mut d = [0.0; N];
        for i in 0..N {
            d[i] = dv * self.d[i];
        }
        Self { v, d }
    }
}
