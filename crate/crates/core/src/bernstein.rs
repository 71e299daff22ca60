//! Tensor-product Bernstein polynomials on an axis-aligned box.

use serde::{Deserialize, Serialize};

use crate::jet::Jet4;
use crate::linalg::Vec2;

/// Highest derivative order tracked by jets.
const MAX_ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernsteinPoly2 {
    pub degree: usize,
    pub lo: Vec2,
    pub hi: Vec2,
    /// `coeffs[i * (degree + 1) + j]` multiplies `B_i(s) B_j(t)`.
    pub coeffs: Vec<f64>,
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

/// `out[r][i]` = r-th derivative of `B_{i,m}` at `s`, r = 0..=4.
fn basis_derivatives(m: usize, s: f64) -> [Vec<f64>; MAX_ORDER + 1] {
    let plain = |n: usize, i: isize| -> f64 {
        if i < 0 || i as usize > n {
            0.0
        } else {
            let i = i as usize;
            binomial(n, i) * s.powi(i as i32) * (1.0 - s).powi((n - i) as i32)
        }
    };
    std::array::from_fn(|r| {
        (0..=m)
            .map(|i| {
                if r > m {
                    return 0.0;
                }
                let mut falling = 1.0;
                for q in 0..r {
                    falling *= (m - q) as f64;
                }
                let mut acc = 0.0;
                for k in 0..=r {
                    let sign = if (r - k) % 2 == 0 { 1.0 } else { -1.0 };
                    acc += sign * binomial(r, k) * plain(m - r, i as isize - k as isize);
                }
                falling * acc
            })
            .collect()
    })
}

/// Bernstein coefficients (degree `m`, interval `[lo, lo + w]`) of `x^p`.
fn monomial_1d(m: usize, lo: f64, w: f64, p: usize) -> Vec<f64> {
    assert!(p <= m, "monomial degree {p} exceeds basis degree {m}");
    let mut out = vec![0.0; m + 1];
    // x^p = sum_k C(p,k) lo^{p-k} w^k s^k ;  s^k = sum_{i>=k} C(i,k)/C(m,k) B_i
    for k in 0..=p {
        let c = binomial(p, k) * lo.powi((p - k) as i32) * w.powi(k as i32);
        for (i, o) in out.iter_mut().enumerate().skip(k) {
            *o += c * binomial(i, k) / binomial(m, k);
        }
    }
    out
}

impl BernsteinPoly2 {
    pub fn zero(degree: usize, lo: Vec2, hi: Vec2) -> Self {
        BernsteinPoly2 { degree, lo, hi, coeffs: vec![0.0; (degree + 1) * (degree + 1)] }
    }

    pub fn num_coeffs(&self) -> usize {
        self.coeffs.len()
    }

    /// Bernstein form of `sum a * x^p * y^q` over `(p, q, a)` terms.
    pub fn from_monomials(degree: usize, lo: Vec2, hi: Vec2, terms: &[(usize, usize, f64)]) -> Self {
        let mut poly = Self::zero(degree, lo, hi);
        let w = [hi[0] - lo[0], hi[1] - lo[1]];
        for &(p, q, a) in terms {
            let xs = monomial_1d(degree, lo[0], w[0], p);
            let ys = monomial_1d(degree, lo[1], w[1], q);
            for i in 0..=degree {
                for j in 0..=degree {
                    poly.coeffs[i * (degree + 1) + j] += a * xs[i] * ys[j];
                }
            }
        }
        poly
    }

    fn widths(&self) -> Vec2 {
        [self.hi[0] - self.lo[0], self.hi[1] - self.lo[1]]
    }

    /// Value and all partial derivatives through order four.
    pub fn jet(&self, x: Vec2) -> Jet4 {
        let w = self.widths();
        let s = (x[0] - self.lo[0]) / w[0];
        let t = (x[1] - self.lo[1]) / w[1];
        let bs = basis_derivatives(self.degree, s);
        let bt = basis_derivatives(self.degree, t);
        let m1 = self.degree + 1;
        // d[p][q] = d^{p+q} / dx^p dy^q
        let mut d = [[0.0; MAX_ORDER + 1]; MAX_ORDER + 1];
        for p in 0..=MAX_ORDER {
            for q in 0..=(MAX_ORDER - p) {
                let mut acc = 0.0;
                for i in 0..m1 {
                    let bi = bs[p][i];
                    if bi == 0.0 {
                        continue;
                    }
                    let row = &self.coeffs[i * m1..(i + 1) * m1];
                    let mut inner = 0.0;
                    for (c, b) in row.iter().zip(&bt[q]) {
                        inner += c * b;
                    }
                    acc += bi * inner;
                }
                d[p][q] = acc / (w[0].powi(p as i32) * w[1].powi(q as i32));
            }
        }
        Jet4::from_partials(x, &d)
    }

    pub fn value(&self, x: Vec2) -> f64 {
        let w = self.widths();
        let s = (x[0] - self.lo[0]) / w[0];
        let t = (x[1] - self.lo[1]) / w[1];
        let m = self.degree;
        let bs: Vec<f64> = (0..=m).map(|i| binomial(m, i) * s.powi(i as i32) * (1.0 - s).powi((m - i) as i32)).collect();
        let bt: Vec<f64> = (0..=m).map(|j| binomial(m, j) * t.powi(j as i32) * (1.0 - t).powi((m - j) as i32)).collect();
        let mut acc = 0.0;
        for i in 0..=m {
            let mut inner = 0.0;
            for j in 0..=m {
                inner += self.coeffs[i * (m + 1) + j] * bt[j];
            }
            acc += bs[i] * inner;
        }
        acc
    }

    /// Jet of the single basis function with flat index `idx`.
    pub fn basis_jet(&self, idx: usize, x: Vec2) -> Jet4 {
        let mut e = Self::zero(self.degree, self.lo, self.hi);
        e.coeffs[idx] = 1.0;
        e.jet(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_of_unity() {
        let p = BernsteinPoly2 { degree: 5, lo: [0.0, 0.0], hi: [1.0, 1.0], coeffs: vec![1.0; 36] };
        let j = p.jet([0.3, 0.7]);
        assert!((j.value - 1.0).abs() < 1e-14);
        assert!(j.grad[0].abs() < 1e-13 && j.hess[0][1].abs() < 1e-12);
        assert!(j.fourth.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn monomials_reproduce_exactly() {
        let lo = [-0.5, 0.25];
        let hi = [1.5, 2.0];
        // f = 2 + 3x - y + x^2 y^2 - 0.5 x^3
        let p = BernsteinPoly2::from_monomials(6, lo, hi, &[(0, 0, 2.0), (1, 0, 3.0), (0, 1, -1.0), (2, 2, 1.0), (3, 0, -0.5)]);
        let x = [0.7, 1.1];
        let j = p.jet(x);
        let (a, b) = (x[0], x[1]);
        let val = 2.0 + 3.0 * a - b + a * a * b * b - 0.5 * a * a * a;
        assert!((j.value - val).abs() < 1e-12);
        assert!((p.value(x) - val).abs() < 1e-12);
        assert!((j.grad[0] - (3.0 + 2.0 * a * b * b - 1.5 * a * a)).abs() < 1e-11);
        assert!((j.grad[1] - (-1.0 + 2.0 * a * a * b)).abs() < 1e-11);
        assert!((j.hess[0][1] - 4.0 * a * b).abs() < 1e-10);
        // d^3/dx^3 = -3 ; d^3/dx dy^2 = 4 a
        assert!((j.d3(0, 0, 0) + 3.0).abs() < 1e-9);
        assert!((j.d3(0, 1, 1) - 4.0 * a).abs() < 1e-9);
        // d^4/dx^2 dy^2 = 4
        assert!((j.d4(0, 1, 0, 1) - 4.0).abs() < 1e-8);
        assert!(j.d4(0, 0, 0, 0).abs() < 1e-8);
    }
}
