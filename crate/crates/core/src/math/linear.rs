//! Small fixed-size vectors and matrices over a generic scalar.

use super::Real;

pub type Vec3<R> = [R; 3];
pub type Vec6<R> = [R; 6];
pub type Mat3<R> = [[R; 3]; 3];
pub type Mat6<R> = [[R; 6]; 6];

pub fn v3<R: Real>(x: R, y: R, z: R) -> Vec3<R> {
    [x, y, z]
}

pub fn v3_zero<R: Real>() -> Vec3<R> {
    [R::zero(); 3]
}

pub fn v3_add<R: Real>(a: Vec3<R>, b: Vec3<R>) -> Vec3<R> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn v3_sub<R: Real>(a: Vec3<R>, b: Vec3<R>) -> Vec3<R> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn v3_scale<R: Real>(s: R, a: Vec3<R>) -> Vec3<R> {
    [s * a[0], s * a[1], s * a[2]]
}

pub fn v3_dot<R: Real>(a: Vec3<R>, b: Vec3<R>) -> R {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn v3_cross<R: Real>(a: Vec3<R>, b: Vec3<R>) -> Vec3<R> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn v3_norm<R: Real>(a: Vec3<R>) -> R {
    v3_dot(a, a).sqrt()
}

pub fn m3_zero<R: Real>() -> Mat3<R> {
    [[R::zero(); 3]; 3]
}

pub fn m3_identity<R: Real>() -> Mat3<R> {
    let mut m = m3_zero();
    m[0][0] = R::one();
    m[1][1] = R::one();
    m[2][2] = R::one();
    m
}

pub fn m3_add<R: Real>(a: Mat3<R>, b: Mat3<R>) -> Mat3<R> {
    let mut m = m3_zero();
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = a[i][j] + b[i][j];
        }
    }
    m
}

pub fn m3_scale<R: Real>(s: R, a: Mat3<R>) -> Mat3<R> {
    let mut m = m3_zero();
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = s * a[i][j];
        }
    }
    m
}

pub fn m3_mul<R: Real>(a: Mat3<R>, b: Mat3<R>) -> Mat3<R> {
    let mut m = m3_zero();
    for i in 0..3 {
        for j in 0..3 {
            let mut acc = R::zero();
            for k in 0..3 {
                acc = acc + a[i][k] * b[k][j];
            }
            m[i][j] = acc;
        }
    }
    m
}

pub fn m3_transpose<R: Real>(a: Mat3<R>) -> Mat3<R> {
    let mut m = m3_zero();
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = a[j][i];
        }
    }
    m
}

pub fn m3_mul_v3<R: Real>(a: Mat3<R>, v: Vec3<R>) -> Vec3<R> {
    [
        v3_dot(a[0], v),
        v3_dot(a[1], v),
        v3_dot(a[2], v),
    ]
}

/// Multiply by the transpose without forming it.
pub fn m3_tr_mul_v3<R: Real>(a: Mat3<R>, v: Vec3<R>) -> Vec3<R> {
    [
        a[0][0] * v[0] + a[1][0] * v[1] + a[2][0] * v[2],
        a[0][1] * v[0] + a[1][1] * v[1] + a[2][1] * v[2],
        a[0][2] * v[0] + a[1][2] * v[1] + a[2][2] * v[2],
    ]
}

pub fn m6_zero<R: Real>() -> Mat6<R> {
    [[R::zero(); 6]; 6]
}

pub fn m6_mul_v6<R: Real>(a: &Mat6<R>, v: &Vec6<R>) -> Vec6<R> {
    let mut out = [R::zero(); 6];
    for i in 0..6 {
        let mut acc = R::zero();
        for j in 0..6 {
            acc = acc + a[i][j] * v[j];
        }
        out[i] = acc;
    }
    out
}

/// Solve `A x = b` for symmetric positive definite `A` via Cholesky.
///
/// Panics are avoided: a non-positive pivot is reported as `None` so callers
/// can surface a model error.
pub fn m6_solve_spd<R: Real>(a: &Mat6<R>, b: &Vec6<R>) -> Option<Vec6<R>> {
    // L L^T = A
    let mut l = m6_zero::<R>();
    for i in 0..6 {
        for j in 0..=i {
            let mut sum = a[i][j];
            for k in 0..j {
                sum = sum - l[i][k] * l[j][k];
            }
            if i == j {
                if sum.val() <= 0.0 {
                    return None;
                }
                l[i][j] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    // forward substitution L y = b
    let mut y = [R::zero(); 6];
    for i in 0..6 {
        let mut sum = b[i];
        for k in 0..i {
            sum = sum - l[i][k] * y[k];
        }
        y[i] = sum / l[i][i];
    }
    // back substitution L^T x = y
    let mut x = [R::zero(); 6];
    for i in (0..6).rev() {
        let mut sum = y[i];
        for k in (i + 1)..6 {
            sum = sum - l[k][i] * x[k];
        }
        x[i] = sum / l[i][i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spd_solve_recovers_solution() {
        // A = M M^T + I is SPD for any M.
        let m: Mat6<f64> = [
            [2.0, 0.1, 0.0, 0.3, 0.0, 0.0],
            [0.1, 1.5, 0.2, 0.0, 0.0, 0.1],
            [0.0, 0.2, 1.0, 0.0, 0.4, 0.0],
            [0.3, 0.0, 0.0, 2.5, 0.0, 0.0],
            [0.0, 0.0, 0.4, 0.0, 1.2, 0.2],
            [0.0, 0.1, 0.0, 0.0, 0.2, 0.9],
        ];
        let mut a = m6_zero::<f64>();
        for i in 0..6 {
            for j in 0..6 {
                let mut acc = 0.0;
                for k in 0..6 {
                    acc += m[i][k] * m[j][k];
                }
                a[i][j] = acc + if i == j { 1.0 } else { 0.0 };
            }
        }
        let x_true = [1.0, -2.0, 0.5, 3.0, -0.1, 0.7];
        let b = m6_mul_v6(&a, &x_true);
        let x = m6_solve_spd(&a, &b).unwrap();
        for i in 0..6 {
            assert!((x[i] - x_true[i]).abs() < 1e-12);
        }
    }
}
