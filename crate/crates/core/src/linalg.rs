//! Fixed-size 2-D helpers. Everything in this crate lives in the plane, so
//! plain arrays with explicit index loops are used instead of a matrix type.

pub type Vec2 = [f64; 2];
pub type Mat2 = [[f64; 2]; 2];

pub const IDENTITY: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

#[inline]
pub fn add(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] + b[0], a[1] + b[1]]
}

#[inline]
pub fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn scale(s: f64, a: Vec2) -> Vec2 {
    [s * a[0], s * a[1]]
}

#[inline]
pub fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// z-component of the 3-D cross product.
#[inline]
pub fn cross(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub fn norm(a: Vec2) -> f64 {
    a[0].hypot(a[1])
}

#[inline]
pub fn lerp(a: Vec2, b: Vec2, t: f64) -> Vec2 {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

pub fn det(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

pub fn inverse(m: &Mat2) -> Option<Mat2> {
    let d = det(m);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    Some([[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]])
}

/// Adjugate; for a symmetric Hessian this is the cofactor matrix.
pub fn adjugate(m: &Mat2) -> Mat2 {
    [[m[1][1], -m[0][1]], [-m[1][0], m[0][0]]]
}

pub fn mat_vec(m: &Mat2, v: Vec2) -> Vec2 {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

pub fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

pub fn transpose(m: &Mat2) -> Mat2 {
    [[m[0][0], m[1][0]], [m[0][1], m[1][1]]]
}

/// Eigen-decomposition of a symmetric 2x2 matrix. Eigenvalues ascending;
/// columns of the returned matrix are the unit eigenvectors.
pub fn sym_eigen(m: &Mat2) -> ([f64; 2], Mat2) {
    let a = m[0][0];
    let b = 0.5 * (m[0][1] + m[1][0]);
    let c = m[1][1];
    let mean = 0.5 * (a + c);
    let r = (0.5 * (a - c)).hypot(b);
    let lo = mean - r;
    let hi = mean + r;
    if r == 0.0 {
        return ([lo, hi], IDENTITY);
    }
    // angle of the eigenvector belonging to `hi`
    let theta = 0.5 * (2.0 * b).atan2(a - c);
    let (s, co) = theta.sin_cos();
    let v_hi = [co, s];
    let v_lo = [-s, co];
    ([lo, hi], [[v_lo[0], v_hi[0]], [v_lo[1], v_hi[1]]])
}

/// Smallest eigenvalue of a symmetric 2x2 matrix.
pub fn min_eigenvalue(m: &Mat2) -> f64 {
    sym_eigen(m).0[0]
}

pub fn max_eigenvalue(m: &Mat2) -> f64 {
    sym_eigen(m).0[1]
}

pub fn frobenius(m: &Mat2) -> f64 {
    let mut s = 0.0;
    for row in m {
        for v in row {
            s += v * v;
        }
    }
    s.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_reconstructs() {
        let m = [[3.0, 1.2], [1.2, -0.5]];
        let (ev, q) = sym_eigen(&m);
        assert!(ev[0] <= ev[1]);
        for k in 0..2 {
            let v = [q[0][k], q[1][k]];
            let mv = mat_vec(&m, v);
            assert!((mv[0] - ev[k] * v[0]).abs() < 1e-12);
            assert!((mv[1] - ev[k] * v[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_roundtrip() {
        let m = [[2.0, 0.3], [0.3, 0.7]];
        let inv = inverse(&m).unwrap();
        let p = mat_mul(&m, &inv);
        assert!((p[0][0] - 1.0).abs() < 1e-14 && p[0][1].abs() < 1e-14);
        assert!(inverse(&[[1.0, 2.0], [2.0, 4.0]]).is_none());
    }
}
