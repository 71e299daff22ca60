#![allow(clippy::needless_range_loop)]

use abreu_core::calculus::{abreu_s_forms, curvature_tensors, hessian_package, point_state, vector_fields, PointState};
use abreu_core::jet::Jet4;
use abreu_core::potential::{AffineShift, SymplecticPotential};
use abreu_core::{ConvexPotential, Polygon, Vec2};
use proptest::prelude::*;

/// Jet with Hessian eigenvalues in [1/4, 4] and bounded higher derivatives.
fn convex_jet() -> impl Strategy<Value = Jet4> {
    (
        0.25f64..4.0,
        0.25f64..4.0,
        0.0f64..std::f64::consts::PI,
        prop::array::uniform4(-3.0f64..3.0),
        prop::array::uniform5(-5.0f64..5.0),
        prop::array::uniform2(-2.0f64..2.0),
    )
        .prop_map(|(l1, l2, th, third, fourth, x)| {
            let (c, s) = (th.cos(), th.sin());
            let hess = [[l1 * c * c + l2 * s * s, (l1 - l2) * c * s], [(l1 - l2) * c * s, l1 * s * s + l2 * c * c]];
            Jet4 { location: x, value: 0.3, grad: [0.1, -0.2], hess, third, fourth }
        })
}

/// Square potential with a small polynomial correction, and an interior
/// point at distance at least 0.1 from the boundary.
fn square_case() -> impl Strategy<Value = (SymplecticPotential, Vec2)> {
    (prop::array::uniform4(-0.05f64..0.05), 0.1f64..0.9, 0.1f64..0.9).prop_map(|(c, x, y)| {
        let terms = [(2, 2, c[0]), (3, 1, c[1]), (1, 3, c[2]), (4, 0, c[3])];
        (SymplecticPotential::with_monomials(&Polygon::unit_square(), 4, &terms), [x, y])
    })
}

fn state_at(pot: &SymplecticPotential, x: Vec2) -> PointState {
    point_state(pot, x).unwrap()
}

fn max_abs<const N: usize>(v: [f64; N]) -> f64 {
    v.iter().fold(0.0_f64, |m, a| m.max(a.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn s_forms_agree_on_convex_jets(jet in convex_jet()) {
        let st = hessian_package(&jet).unwrap();
        let f = abreu_s_forms(&st);
        let scale = max_abs(f.values()).max(1.0);
        prop_assert!(f.max_deviation() / scale < 1e-8, "{:?}", f);
        let c = curvature_tensors(&st);
        prop_assert!((c.s - st.s).abs() / scale < 1e-10);
        prop_assert!(c.norm_f2 >= -1e-12);
    }

    #[test]
    fn lowered_curvature_is_pair_symmetric(jet in convex_jet()) {
        let c = curvature_tensors(&hessian_package(&jet).unwrap());
        let mut scale: f64 = 1.0;
        let mut gap: f64 = 0.0;
        for i in 0..2 { for j in 0..2 { for k in 0..2 { for l in 0..2 {
            scale = scale.max(c.f_lower[i][j][k][l].abs());
            gap = gap.max((c.f_lower[i][j][k][l] - c.f_lower[k][l][i][j]).abs());
        }}}}
        prop_assert!(gap / scale < 1e-9);
    }

    #[test]
    fn hessian_inverse_identities(jet in convex_jet()) {
        let st = hessian_package(&jet).unwrap();
        let h = jet.hess;
        for i in 0..2 {
            for k in 0..2 {
                let p: f64 = (0..2).map(|j| st.hess_inv[i][j] * h[j][k]).sum();
                let delta = if i == k { 1.0 } else { 0.0 };
                prop_assert!((p - delta).abs() < 1e-10);
                prop_assert!((st.cofactor[i][k] - st.det_hess * st.hess_inv[i][k]).abs() < 1e-10 * st.det_hess.max(1.0));
            }
        }
        // u^{ij} L_j = -d_j u^{ij}
        let l1: Vec<f64> = (0..2)
            .map(|j| (0..2).flat_map(|a| (0..2).map(move |b| (a, b))).map(|(a, b)| st.hess_inv[a][b] * jet.d3(a, b, j)).sum())
            .collect();
        for i in 0..2 {
            let lhs: f64 = (0..2).map(|j| st.hess_inv[i][j] * l1[j]).sum();
            let rhs: f64 = -(0..2).map(|j| st.hess_inv_d1[i][j][j]).sum::<f64>();
            prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
        }
        let vf = vector_fields(&st, 4.0, [0.0, 0.0]);
        prop_assert!(vf.h_identity_residual < 1e-10);
    }

    #[test]
    fn inverse_hessian_derivatives_match_differences((pot, x) in square_case()) {
        let st = state_at(&pot, x);
        prop_assume!(st.det_hess > 0.0);
        let inv = |p: Vec2| state_at(&pot, p).hess_inv;
        let e = |k: usize, h: f64| if k == 0 { [h, 0.0] } else { [0.0, h] };
        let add = |a: Vec2, b: Vec2| [a[0] + b[0], a[1] + b[1]];
        let (h1, h2) = (1e-4, 1e-3);
        let mut s1: f64 = 0.0;
        let mut s2: f64 = 0.0;
        let mut e1: f64 = 0.0;
        let mut e2: f64 = 0.0;
        for k in 0..2 {
            let (p, m) = (inv(add(x, e(k, h1))), inv(add(x, e(k, -h1))));
            for i in 0..2 { for j in 0..2 {
                let fd = (p[i][j] - m[i][j]) / (2.0 * h1);
                s1 = s1.max(st.hess_inv_d1[i][j][k].abs());
                e1 = e1.max((fd - st.hess_inv_d1[i][j][k]).abs());
            }}
            for l in 0..2 {
                let f = |a: f64, b: f64| inv(add(add(x, e(k, a)), e(l, b)));
                let (pp, pm, mp, mm) = (f(h2, h2), f(h2, -h2), f(-h2, h2), f(-h2, -h2));
                for i in 0..2 { for j in 0..2 {
                    let fd = (pp[i][j] - pm[i][j] - mp[i][j] + mm[i][j]) / (4.0 * h2 * h2);
                    s2 = s2.max(st.hess_inv_d2[i][j][k][l].abs());
                    e2 = e2.max((fd - st.hess_inv_d2[i][j][k][l]).abs());
                }}
            }
        }
        prop_assert!(e1 / s1.max(1e-3) < 1e-5, "first {e1} / {s1}");
        prop_assert!(e2 / s2.max(1e-3) < 1e-4, "second {e2} / {s2}");
    }

    #[test]
    fn cofactor_rows_are_divergence_free((pot, x) in square_case()) {
        let h = 1e-5;
        let cof = |p: Vec2| state_at(&pot, p).cofactor;
        for i in 0..2 {
            let dx = (cof([x[0] + h, x[1]])[i][0] - cof([x[0] - h, x[1]])[i][0]) / (2.0 * h);
            let dy = (cof([x[0], x[1] + h])[i][1] - cof([x[0], x[1] - h])[i][1]) / (2.0 * h);
            prop_assert!((dx + dy).abs() < 1e-6, "row {i}: {}", dx + dy);
        }
    }

    #[test]
    fn affine_terms_change_only_value_and_gradient((pot, x) in square_case(), c in -1.0f64..1.0, g in prop::array::uniform2(-1.0f64..1.0)) {
        let shifted = pot.clone().with_affine_shift(AffineShift { c, g });
        let (a, b) = (state_at(&pot, x), state_at(&shifted, x));
        prop_assert_eq!(a.hess_inv, b.hess_inv);
        prop_assert_eq!(a.hess_inv_d2, b.hess_inv_d2);
        prop_assert_eq!(a.v, b.v);
        prop_assert_eq!(a.s, b.s);
        prop_assert_eq!(pot.jet(x).unwrap().hess, shifted.jet(x).unwrap().hess);
    }
}
