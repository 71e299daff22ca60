//! Pointwise tensor calculus built on a 4-jet of a convex function.
//!
//! Index conventions: `hess_inv_d1[i][j][k] = d_k u^{ij}` and
//! `hess_inv_d2[i][j][k][l] = d_k d_l u^{ij}`. Every contraction is an
//! explicit loop over both indices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::{Jet4, Tensor3, Tensor4};
use crate::linalg::{self, Mat2, Vec2};
use crate::polytope::Polygon;
use crate::potential::{ConvexPotential, SymplecticPotential};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointState {
    pub jet: Jet4,
    pub hess_inv: Mat2,
    pub cofactor: Mat2,
    pub det_hess: f64,
    /// `log det_hess`
    pub log_det: f64,
    /// `1 / det_hess`
    pub det_inv: f64,
    pub hess_inv_d1: Tensor3,
    pub hess_inv_d2: Tensor4,
    /// `v^j = -d_i u^{ij}`
    pub v: Vec2,
    pub s: f64,
}

pub fn hessian_package(jet: &Jet4) -> Result<PointState> {
    let h = jet.hess;
    let det_hess = linalg::det(&h);
    let min_eig = linalg::min_eigenvalue(&h);
    if !(min_eig > 0.0) || !(det_hess > 0.0) || !det_hess.is_finite() {
        return Err(Error::NotConvex { at: jet.location, min_eig });
    }
    let hi = linalg::inverse(&h).ok_or(Error::NotConvex { at: jet.location, min_eig })?;
    let u3 = jet.third_full();
    let u4 = jet.fourth_full();

    let mut d1 = [[[0.0; 2]; 2]; 2];
    for j in 0..2 {
        for k in 0..2 {
            for i in 0..2 {
                let mut acc = 0.0;
                for a in 0..2 {
                    for b in 0..2 {
                        acc += hi[j][a] * u3[a][b][i] * hi[b][k];
                    }
                }
                d1[j][k][i] = -acc;
            }
        }
    }

    let mut d2 = [[[[0.0; 2]; 2]; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    let mut acc = 0.0;
                    for a in 0..2 {
                        for b in 0..2 {
                            acc += d1[i][a][l] * u3[a][b][k] * hi[b][j];
                            acc += hi[i][a] * u4[a][b][k][l] * hi[b][j];
                            acc += hi[i][a] * u3[a][b][k] * d1[b][j][l];
                        }
                    }
                    d2[i][j][k][l] = -acc;
                }
            }
        }
    }

    let mut v = [0.0; 2];
    for j in 0..2 {
        for i in 0..2 {
            v[j] -= d1[i][j][i];
        }
    }
    let mut s = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            s -= d2[i][j][i][j];
        }
    }

    Ok(PointState {
        jet: *jet,
        hess_inv: hi,
        cofactor: linalg::adjugate(&h),
        det_hess,
        log_det: det_hess.ln(),
        det_inv: 1.0 / det_hess,
        hess_inv_d1: d1,
        hess_inv_d2: d2,
        v,
        s,
    })
}

/// Jet, then [`hessian_package`].
pub fn point_state<P: ConvexPotential + ?Sized>(pot: &P, x: Vec2) -> Result<PointState> {
    hessian_package(&pot.jet(x)?)
}

/// [`hessian_package`] of the potential's adapted jet. Frame-dependent
/// fields (`hess_inv`, `v`, `det_hess`) refer to the adapted frame.
pub fn invariant_state<P: ConvexPotential + ?Sized>(pot: &P, x: Vec2) -> Result<PointState> {
    hessian_package(&pot.adapted_jet(x)?)
}

/// First and second derivatives of `log det(u_ij)`.
pub fn log_det_derivatives(state: &PointState) -> (Vec2, Mat2) {
    let hi = state.hess_inv;
    let d1 = state.hess_inv_d1;
    let u3 = state.jet.third_full();
    let u4 = state.jet.fourth_full();
    let mut l1 = [0.0; 2];
    let mut l2 = [[0.0; 2]; 2];
    for i in 0..2 {
        for a in 0..2 {
            for b in 0..2 {
                l1[i] += hi[a][b] * u3[a][b][i];
            }
        }
        for j in 0..2 {
            let mut acc = 0.0;
            for a in 0..2 {
                for b in 0..2 {
                    acc += d1[a][b][j] * u3[a][b][i] + hi[a][b] * u4[a][b][i][j];
                }
            }
            l2[i][j] = acc;
        }
    }
    (l1, l2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SForms {
    /// `-d_i d_j u^{ij}`
    pub divergence: f64,
    /// `u^{ij} (L_ij - L_i L_j)` with `L = log det`
    pub log_det: f64,
    /// `-U^{ij} d_i d_j (1/det)` from derivatives of the determinant
    pub cofactor: f64,
}

impl SForms {
    pub fn values(&self) -> [f64; 3] {
        [self.divergence, self.log_det, self.cofactor]
    }

    pub fn max_deviation(&self) -> f64 {
        let v = self.values();
        let mut m: f64 = 0.0;
        for a in 0..3 {
            for b in (a + 1)..3 {
                m = m.max((v[a] - v[b]).abs());
            }
        }
        m
    }
}

pub fn abreu_s_forms(state: &PointState) -> SForms {
    let hi = state.hess_inv;
    let (l1, l2) = log_det_derivatives(state);
    let mut log_form = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            log_form += hi[i][j] * (l2[i][j] - l1[i] * l1[j]);
        }
    }

    // determinant D = u11 u22 - u12^2 differentiated entrywise
    let j = &state.jet;
    let h = j.hess;
    let h1 = |a: usize, b: usize, i: usize| j.d3(a, b, i);
    let h2 = |a: usize, b: usize, i: usize, k: usize| j.d4(a, b, i, k);
    let d = linalg::det(&h);
    let mut dd = [0.0; 2];
    let mut ddd = [[0.0; 2]; 2];
    for i in 0..2 {
        dd[i] = h1(0, 0, i) * h[1][1] + h[0][0] * h1(1, 1, i) - 2.0 * h[0][1] * h1(0, 1, i);
        for k in 0..2 {
            ddd[i][k] = h2(0, 0, i, k) * h[1][1] + h1(0, 0, i) * h1(1, 1, k) + h1(0, 0, k) * h1(1, 1, i) + h[0][0] * h2(1, 1, i, k)
                - 2.0 * (h1(0, 1, k) * h1(0, 1, i) + h[0][1] * h2(0, 1, i, k));
        }
    }
    let u = linalg::adjugate(&h);
    let mut cof_form = 0.0;
    for i in 0..2 {
        for k in 0..2 {
            let f_ik = -ddd[i][k] / (d * d) + 2.0 * dd[i] * dd[k] / (d * d * d);
            cof_form -= u[i][k] * f_ik;
        }
    }

    SForms { divergence: state.s, log_det: log_form, cofactor: cof_form }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VectorFields {
    pub v: Vec2,
    /// `v - (A/2)(x - origin)`
    pub w: Vec2,
    /// `u - x . grad u`
    pub h: f64,
    pub h_grad: Vec2,
    /// `|u^{ij} h_i + x^j|`
    pub h_identity_residual: f64,
}

pub fn vector_fields(state: &PointState, a: f64, origin: Vec2) -> VectorFields {
    let j = &state.jet;
    let x = j.location;
    let rel = linalg::sub(x, origin);
    let w = [state.v[0] - 0.5 * a * rel[0], state.v[1] - 0.5 * a * rel[1]];
    let h = j.value - linalg::dot(j.grad, x);
    let mut h_grad = [0.0; 2];
    for i in 0..2 {
        for k in 0..2 {
            h_grad[i] -= j.hess[i][k] * x[k];
        }
    }
    let mut res: f64 = 0.0;
    for jj in 0..2 {
        let mut acc = x[jj];
        for i in 0..2 {
            acc += state.hess_inv[i][jj] * h_grad[i];
        }
        res = res.max(acc.abs());
    }
    VectorFields { v: state.v, w, h, h_grad, h_identity_residual: res }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvaturePack {
    /// `F^{ab}_{kl} = -d_k d_l u^{ab}`
    pub f_mixed: Tensor4,
    /// `F_{ijkl} = u_ia u_jb F^{ab}_{kl}`
    pub f_lower: Tensor4,
    /// `G^i_k = F^{ij}_{kj}`
    pub g_mixed: Mat2,
    pub norm_f2: f64,
    pub norm_g2: f64,
    pub s: f64,
}

pub fn curvature_tensors(state: &PointState) -> CurvaturePack {
    let h = state.jet.hess;
    let mut f = [[[[0.0; 2]; 2]; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    f[a][b][k][l] = -state.hess_inv_d2[a][b][k][l];
                }
            }
        }
    }
    let mut low = [[[[0.0; 2]; 2]; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    let mut acc = 0.0;
                    for a in 0..2 {
                        for b in 0..2 {
                            acc += h[i][a] * h[j][b] * f[a][b][k][l];
                        }
                    }
                    low[i][j][k][l] = acc;
                }
            }
        }
    }
    let mut g = [[0.0; 2]; 2];
    for i in 0..2 {
        for k in 0..2 {
            for j in 0..2 {
                g[i][k] += f[i][j][k][j];
            }
        }
    }
    let mut norm_f2 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    norm_f2 += f[i][j][k][l] * f[k][l][i][j];
                }
            }
        }
    }
    let mut norm_g2 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            norm_g2 += g[i][j] * g[j][i];
        }
    }
    CurvaturePack { f_mixed: f, f_lower: low, g_mixed: g, norm_f2, norm_g2, s: g[0][0] + g[1][1] }
}

/// Metric `u_ij dx dx + u^{ij} deta deta` on the torus bundle, as a 4x4 block
/// matrix in the order (x1, x2, eta1, eta2).
pub fn guillemin_metric(state: &PointState) -> [[f64; 4]; 4] {
    let mut g = [[0.0; 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            g[i][j] = state.jet.hess[i][j];
            g[i + 2][j + 2] = state.hess_inv[i][j];
        }
    }
    g
}

/// `E^{ij} = -u^{ia} e_ab u^{bj}` and its first derivatives `E^{ij}_k`.
pub fn variation_tensor(state: &PointState, eps: &Jet4) -> (Mat2, Tensor3) {
    let hi = state.hess_inv;
    let d1 = state.hess_inv_d1;
    let e2 = eps.hess;
    let e3 = eps.third_full();
    let mut e = [[0.0; 2]; 2];
    let mut de = [[[0.0; 2]; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    e[i][j] -= hi[i][a] * e2[a][b] * hi[b][j];
                    for k in 0..2 {
                        de[i][j][k] -=
                            d1[i][a][k] * e2[a][b] * hi[b][j] + hi[i][a] * e3[a][b][k] * hi[b][j] + hi[i][a] * e2[a][b] * d1[b][j][k];
                    }
                }
            }
        }
    }
    (e, de)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariationFields {
    pub z: Vec2,
    pub w: Vec2,
}

/// First-variation flux fields for `u + t eps` at `t = 0`. Only derivatives
/// of `eps` through order three are read.
pub fn variation_zw(state: &PointState, eps: &Jet4) -> VariationFields {
    let (_, de) = variation_tensor(state, eps);
    let pack = curvature_tensors(state);
    let f = pack.f_mixed;
    let g = pack.g_mixed;
    let mut z = [0.0; 2];
    let mut w = [0.0; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    z[i] -= de[j][l][k] * f[i][k][j][l];
                }
                z[i] += de[i][j][k] * g[k][j];
                w[i] -= de[j][k][j] * g[i][k];
            }
            w[i] += pack.s * de[j][i][j];
        }
    }
    VariationFields { z, w }
}

pub const FIELD_COLUMNS: [&str; 16] =
    ["x", "y", "d", "u", "ux", "uy", "uxx", "uxy", "uyy", "detH", "L", "S", "v1", "v2", "normF2", "normG2"];

/// One row of the field-grid export, in [`FIELD_COLUMNS`] order.
pub fn field_row(pot: &SymplecticPotential, x: Vec2) -> Result<[f64; 16]> {
    field_row_on(pot, pot.polygon(), x)
}

pub fn field_row_on<P: ConvexPotential + ?Sized>(pot: &P, poly: &Polygon, x: Vec2) -> Result<[f64; 16]> {
    let st = point_state(pot, x)?;
    let c = curvature_tensors(&st);
    let j = &st.jet;
    Ok([
        x[0],
        x[1],
        poly.signed_distance(x),
        j.value,
        j.grad[0],
        j.grad[1],
        j.hess[0][0],
        j.hess[0][1],
        j.hess[1][1],
        st.det_hess,
        st.log_det,
        st.s,
        st.v[0],
        st.v[1],
        c.norm_f2,
        c.norm_g2,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{canonical_potential, QuadraticPotential};

    fn gold_square_state(x: Vec2) -> PointState {
        point_state(&canonical_potential(&Polygon::unit_square()), x).unwrap()
    }

    #[test]
    fn quadratic_state_is_trivial() {
        let st = point_state(&QuadraticPotential::standard(), [0.3, -0.8]).unwrap();
        assert_eq!(st.hess_inv, linalg::IDENTITY);
        assert_eq!(st.log_det, 0.0);
        assert_eq!(st.v, [0.0, 0.0]);
        assert!(st.hess_inv_d1.iter().flatten().flatten().all(|v| *v == 0.0));
        assert_eq!(abreu_s_forms(&st).values(), [0.0, 0.0, 0.0]);
        let c = curvature_tensors(&st);
        assert_eq!((c.norm_f2, c.norm_g2, c.s), (0.0, 0.0, 0.0));
        let g = guillemin_metric(&st);
        for (i, row) in g.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                assert_eq!(*v, if i == k { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn constant_unimodular_hessian() {
        let q = QuadraticPotential::new([[2.0, 0.0], [0.0, 0.5]], [0.0, 0.0]);
        let st = point_state(&q, [1.0, 1.0]).unwrap();
        assert_eq!(st.det_hess, 1.0);
        assert_eq!(st.log_det, 0.0);
        assert_eq!(st.v, [0.0, 0.0]);
    }

    #[test]
    fn square_gold_quarter_point() {
        let st = gold_square_state([0.25, 0.5]);
        assert!((st.det_hess - 64.0 / 3.0).abs() < 1e-12);
        assert!((st.log_det - (64.0f64 / 3.0).ln()).abs() < 1e-14);
        assert!((st.v[0] + 0.5).abs() < 1e-14 && st.v[1].abs() < 1e-14);
        assert!((st.cofactor[0][0] - st.det_hess * st.hess_inv[0][0]).abs() < 1e-12);
    }

    #[test]
    fn square_gold_curvature() {
        for x in [[0.5, 0.5], [0.1, 0.8], [0.93, 0.02]] {
            let st = gold_square_state(x);
            let s = abreu_s_forms(&st);
            for v in s.values() {
                assert!((v - 4.0).abs() < 1e-9, "{x:?} {s:?}");
            }
            let c = curvature_tensors(&st);
            assert!((c.f_mixed[0][0][0][0] - 2.0).abs() < 1e-9);
            assert!((c.f_mixed[1][1][1][1] - 2.0).abs() < 1e-9);
            assert!(c.f_mixed[0][1][0][1].abs() < 1e-9 && c.f_mixed[0][0][1][1].abs() < 1e-9);
            assert!((c.norm_f2 - 8.0).abs() < 1e-8 && (c.norm_g2 - 8.0).abs() < 1e-8);
            assert!((c.s - 4.0).abs() < 1e-9);
        }
    }

    #[test]
    fn simplex_gold_is_six() {
        let u = canonical_potential(&Polygon::standard_simplex());
        for x in [[0.2, 0.3], [0.05, 0.9], [1.0 / 3.0, 1.0 / 3.0]] {
            let s = abreu_s_forms(&point_state(&u, x).unwrap());
            for v in s.values() {
                assert!((v - 6.0).abs() < 1e-9, "{x:?} {s:?}");
            }
        }
    }

    #[test]
    fn adapted_frame_invariants() {
        let poly = Polygon::new(vec![[0.0, 0.0], [2.0, 0.2], [1.5, 1.4], [0.1, 1.0]], vec![1.0, 0.7, 1.3, 1.0], [0.9, 0.6]).unwrap();
        let u = crate::potential::SymplecticPotential::with_monomials(&poly, 4, &[(2, 2, 0.05), (1, 3, -0.02)]);
        for x in [[0.9, 0.6], [1.9, 0.25], [0.2, 0.1], [0.8, 1.1]] {
            let a = curvature_tensors(&point_state(&u, x).unwrap());
            let b = curvature_tensors(&invariant_state(&u, x).unwrap());
            for (p, q) in [(a.s, b.s), (a.norm_f2, b.norm_f2), (a.norm_g2, b.norm_g2)] {
                assert!((p - q).abs() < 1e-9 * p.abs().max(1.0), "{x:?} {p} {q}");
            }
        }
        // near the slanted simplex edge the adapted frame keeps its digits
        let s = canonical_potential(&Polygon::standard_simplex());
        for k in 10..26 {
            let d = 0.5f64.powi(k);
            let c = curvature_tensors(&invariant_state(&s, [0.5 - d, 0.5 - d]).unwrap());
            assert!((c.norm_f2 - c.s * c.s + 24.0).abs() < 1e-6, "{k} {}", c.norm_f2 - c.s * c.s);
        }
    }

    #[test]
    fn square_w_field() {
        for x in [[0.2, 0.7], [0.5, 0.5], [0.9, 0.1]] {
            let vf = vector_fields(&gold_square_state(x), 4.0, [0.0, 0.0]);
            assert!((vf.v[0] - (2.0 * x[0] - 1.0)).abs() < 1e-13);
            assert!((vf.w[0] + 1.0).abs() < 1e-13 && (vf.w[1] + 1.0).abs() < 1e-13);
            assert!(vf.h_identity_residual < 1e-10);
        }
    }

    #[test]
    fn quadratic_h() {
        let x = [0.4, -1.2];
        let st = point_state(&QuadraticPotential::standard(), x).unwrap();
        let vf = vector_fields(&st, 0.0, [0.0, 0.0]);
        assert!((vf.h + 0.5 * (0.16 + 1.44)).abs() < 1e-15);
    }

    #[test]
    fn guillemin_metric_at_centre() {
        let g = guillemin_metric(&gold_square_state([0.5, 0.5]));
        assert!((g[0][0] - 4.0).abs() < 1e-14 && (g[1][1] - 4.0).abs() < 1e-14);
        assert!((g[2][2] - 0.25).abs() < 1e-15 && (g[3][3] - 0.25).abs() < 1e-15);
        assert_eq!(g[0][2], 0.0);
    }

    #[test]
    fn affine_epsilon_has_no_flux() {
        let st = gold_square_state([0.3, 0.6]);
        let mut eps = Jet4::zero([0.3, 0.6]);
        eps.value = 1.0;
        eps.grad = [2.0, -1.0];
        let zw = variation_zw(&st, &eps);
        assert_eq!(zw.z, [0.0, 0.0]);
        assert_eq!(zw.w, [0.0, 0.0]);
    }

    #[test]
    fn non_convex_jet_rejected() {
        let mut j = Jet4::zero([0.1, 0.2]);
        j.hess = [[1.0, 0.0], [0.0, -1.0]];
        assert!(matches!(hessian_package(&j), Err(Error::NotConvex { .. })));
    }
}
