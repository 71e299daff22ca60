use serde::{Deserialize, Serialize};

use crate::linalg::{Mat2, Vec2};

/// Value and partial derivatives through order four at one point.
///
/// Third and fourth derivatives are fully symmetric, so they are stored
/// packed by the number of indices equal to 1: `third[q]` is
/// `d^3 / dx^{3-q} dy^q` and `fourth[q]` is `d^4 / dx^{4-q} dy^q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jet4 {
    pub location: Vec2,
    pub value: f64,
    pub grad: Vec2,
    pub hess: Mat2,
    pub third: [f64; 4],
    pub fourth: [f64; 5],
}

pub type Tensor3 = [[[f64; 2]; 2]; 2];
pub type Tensor4 = [[[[f64; 2]; 2]; 2]; 2];

impl Jet4 {
    pub fn zero(location: Vec2) -> Self {
        Jet4 { location, value: 0.0, grad: [0.0; 2], hess: [[0.0; 2]; 2], third: [0.0; 4], fourth: [0.0; 5] }
    }

    /// Build from `d[p][q] = d^{p+q} f / dx^p dy^q` (p + q <= 4).
    pub fn from_partials(location: Vec2, d: &[[f64; 5]; 5]) -> Self {
        Jet4 {
            location,
            value: d[0][0],
            grad: [d[1][0], d[0][1]],
            hess: [[d[2][0], d[1][1]], [d[1][1], d[0][2]]],
            third: [d[3][0], d[2][1], d[1][2], d[0][3]],
            fourth: [d[4][0], d[3][1], d[2][2], d[1][3], d[0][4]],
        }
    }

    #[inline]
    pub fn d3(&self, i: usize, j: usize, k: usize) -> f64 {
        self.third[i + j + k]
    }

    #[inline]
    pub fn d4(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.fourth[i + j + k + l]
    }

    pub fn third_full(&self) -> Tensor3 {
        let mut t = [[[0.0; 2]; 2]; 2];
        for (i, ti) in t.iter_mut().enumerate() {
            for (j, tij) in ti.iter_mut().enumerate() {
                for (k, v) in tij.iter_mut().enumerate() {
                    *v = self.d3(i, j, k);
                }
            }
        }
        t
    }

    pub fn fourth_full(&self) -> Tensor4 {
        let mut t = [[[[0.0; 2]; 2]; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        t[i][j][k][l] = self.d4(i, j, k, l);
                    }
                }
            }
        }
        t
    }

    /// Sum of two jets at the same location.
    pub fn plus(&self, other: &Jet4) -> Jet4 {
        let mut out = *self;
        out.value += other.value;
        for i in 0..2 {
            out.grad[i] += other.grad[i];
            for j in 0..2 {
                out.hess[i][j] += other.hess[i][j];
            }
        }
        for q in 0..4 {
            out.third[q] += other.third[q];
        }
        for q in 0..5 {
            out.fourth[q] += other.fourth[q];
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Jet4 {
        let mut out = *self;
        out.value *= s;
        for i in 0..2 {
            out.grad[i] *= s;
            for j in 0..2 {
                out.hess[i][j] *= s;
            }
        }
        out.third.iter_mut().for_each(|v| *v *= s);
        out.fourth.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// Add `c + g . x`; only value and gradient change.
    pub fn with_affine(&self, c: f64, g: Vec2) -> Jet4 {
        let mut out = *self;
        out.value += c + g[0] * self.location[0] + g[1] * self.location[1];
        out.grad[0] += g[0];
        out.grad[1] += g[1];
        out
    }

    /// Jet of `x -> s * f(m x + b)` at `x`, given the jet of `f` at `m x + b`.
    pub fn pullback(&self, x: Vec2, m: &Mat2, s: f64) -> Jet4 {
        let t3 = self.third_full();
        let t4 = self.fourth_full();
        let mut d = [[0.0; 5]; 5];
        // direct tensor contraction, then repack via index counts
        let mut grad = [0.0; 2];
        let mut hess = [[0.0; 2]; 2];
        let mut third = [[[0.0; 2]; 2]; 2];
        let mut fourth = [[[[0.0; 2]; 2]; 2]; 2];
        for i in 0..2 {
            for a in 0..2 {
                grad[i] += self.grad[a] * m[a][i];
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        hess[i][j] += self.hess[a][b] * m[a][i] * m[b][j];
                    }
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let mut acc = 0.0;
                    for a in 0..2 {
                        for b in 0..2 {
                            for c in 0..2 {
                                acc += t3[a][b][c] * m[a][i] * m[b][j] * m[c][k];
                            }
                        }
                    }
                    third[i][j][k] = acc;
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        let mut acc = 0.0;
                        for a in 0..2 {
                            for b in 0..2 {
                                for c in 0..2 {
                                    for e in 0..2 {
                                        acc += t4[a][b][c][e] * m[a][i] * m[b][j] * m[c][k] * m[e][l];
                                    }
                                }
                            }
                        }
                        fourth[i][j][k][l] = acc;
                    }
                }
            }
        }
        d[0][0] = self.value;
        d[1][0] = grad[0];
        d[0][1] = grad[1];
        d[2][0] = hess[0][0];
        d[1][1] = hess[0][1];
        d[0][2] = hess[1][1];
        d[3][0] = third[0][0][0];
        d[2][1] = third[0][0][1];
        d[1][2] = third[0][1][1];
        d[0][3] = third[1][1][1];
        d[4][0] = fourth[0][0][0][0];
        d[3][1] = fourth[0][0][0][1];
        d[2][2] = fourth[0][0][1][1];
        d[1][3] = fourth[0][1][1][1];
        d[0][4] = fourth[1][1][1][1];
        Jet4::from_partials(x, &d).scaled(s)
    }

    /// Largest absolute entry over each derivative order 1..=4.
    pub fn order_magnitudes(&self) -> [f64; 4] {
        let g = self.grad[0].abs().max(self.grad[1].abs());
        let h = self.hess.iter().flatten().fold(0.0_f64, |a, v| a.max(v.abs()));
        let t = self.third.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let f = self.fourth.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        [g, h, t, f]
    }
}
