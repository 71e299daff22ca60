//! Symplectic potentials `u = u0 + f + (c + g.x)` on a polygon.
//!
//! `u0 = sum_k l_k log l_k` is built from the adapted defining functions and
//! carries the boundary singularity; `f` is a Bernstein polynomial on the
//! polygon's bounding box and is smooth up to the boundary.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bernstein::BernsteinPoly2;
use crate::error::{Error, Result};
use crate::jet::Jet4;
use crate::linalg::{self, Mat2, Vec2};
use crate::polytope::{defining_functions, EdgeFrame, Polygon};

pub const DEFAULT_DEGREE: usize = 6;

/// Anything that can hand out 4-jets of a smooth strictly convex function.
pub trait ConvexPotential: Send + Sync {
    fn jet(&self, x: Vec2) -> Result<Jet4>;

    fn value(&self, x: Vec2) -> Result<f64> {
        Ok(self.jet(x)?.value)
    }

    fn gradient(&self, x: Vec2) -> Result<Vec2> {
        Ok(self.jet(x)?.grad)
    }

    /// Positive exactly on the open domain of definition; `INFINITY` when the
    /// function lives on the whole plane.
    fn domain_margin(&self, x: Vec2) -> f64;

    /// Jet at `x` in some affine frame chosen for conditioning. Only
    /// affine-invariant quantities (`S`, `|F|^2`, `|G|^2`) may be read off it.
    fn adapted_jet(&self, x: Vec2) -> Result<Jet4> {
        self.jet(x)
    }
}

impl<P: ConvexPotential + ?Sized> ConvexPotential for &P {
    fn jet(&self, x: Vec2) -> Result<Jet4> {
        (**self).jet(x)
    }
    fn value(&self, x: Vec2) -> Result<f64> {
        (**self).value(x)
    }
    fn gradient(&self, x: Vec2) -> Result<Vec2> {
        (**self).gradient(x)
    }
    fn domain_margin(&self, x: Vec2) -> f64 {
        (**self).domain_margin(x)
    }
    fn adapted_jet(&self, x: Vec2) -> Result<Jet4> {
        (**self).adapted_jet(x)
    }
}

/// `c + g . x`
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct AffineShift {
    pub c: f64,
    pub g: Vec2,
}

impl AffineShift {
    pub fn eval(&self, x: Vec2) -> f64 {
        self.c + linalg::dot(self.g, x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticPotential {
    polygon: Polygon,
    frames: Vec<EdgeFrame>,
    correction: BernsteinPoly2,
    affine_shift: AffineShift,
}

/// Guillemin's potential `sum_k l_k log l_k` with zero correction of the
/// default degree.
pub fn canonical_potential(poly: &Polygon) -> SymplecticPotential {
    SymplecticPotential::canonical(poly, DEFAULT_DEGREE)
}

impl SymplecticPotential {
    pub fn canonical(poly: &Polygon, degree: usize) -> Self {
        let (lo, hi) = poly.bounding_box();
        Self::with_correction(poly, BernsteinPoly2::zero(degree, lo, hi))
    }

    pub fn with_correction(poly: &Polygon, correction: BernsteinPoly2) -> Self {
        SymplecticPotential { polygon: poly.clone(), frames: defining_functions(poly), correction, affine_shift: AffineShift::default() }
    }

    /// Canonical part plus `sum a x^p y^q`.
    pub fn with_monomials(poly: &Polygon, degree: usize, terms: &[(usize, usize, f64)]) -> Self {
        let (lo, hi) = poly.bounding_box();
        Self::with_correction(poly, BernsteinPoly2::from_monomials(degree, lo, hi, terms))
    }

    pub fn with_affine_shift(mut self, shift: AffineShift) -> Self {
        self.affine_shift = shift;
        self
    }

    pub fn with_coefficients(&self, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != self.correction.coeffs.len() {
            return Err(Error::Input(format!("expected {} coefficients, got {}", self.correction.coeffs.len(), coeffs.len())));
        }
        let mut out = self.clone();
        out.correction.coeffs = coeffs;
        Ok(out)
    }

    pub fn polygon(&self) -> &Polygon {
        &self.polygon
    }

    pub fn frames(&self) -> &[EdgeFrame] {
        &self.frames
    }

    pub fn correction(&self) -> &BernsteinPoly2 {
        &self.correction
    }

    pub fn degree(&self) -> usize {
        self.correction.degree
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.correction.coeffs
    }

    pub fn affine_shift(&self) -> AffineShift {
        self.affine_shift
    }

    fn canonical_jet(&self, x: Vec2) -> Result<Jet4> {
        let mut j = Jet4::zero(x);
        for f in &self.frames {
            let l = f.eval(x);
            if l <= 0.0 || !l.is_finite() {
                return Err(Error::SingularPoint(x));
            }
            add_log_term(&mut j, l, f.gradient());
        }
        Ok(j)
    }

    /// Jet in the coordinates `xi = (l_a, l_b)` of the two nearest
    /// non-parallel edges. The `1/l` blow-up of those edges then sits on the
    /// diagonal and the Hessian inverse loses no digits to cancellation.
    fn edge_frame_jet(&self, x: Vec2) -> Result<Jet4> {
        let ls: Vec<f64> = self.frames.iter().map(|f| f.eval(x)).collect();
        if ls.iter().any(|l| *l <= 0.0 || !l.is_finite()) {
            return Err(Error::SingularPoint(x));
        }
        let nearest = |skip: &dyn Fn(usize) -> bool| (0..ls.len()).filter(|k| !skip(*k)).min_by(|p, q| ls[*p].total_cmp(&ls[*q]));
        let a = nearest(&|_| false).ok_or(Error::SingularPoint(x))?;
        let ga = self.frames[a].gradient();
        let b = nearest(&|k| {
            let gk = self.frames[k].gradient();
            linalg::cross(ga, gk).abs() <= 1e-8 * linalg::norm(ga) * linalg::norm(gk)
        })
        .ok_or(Error::SingularPoint(x))?;
        let gb = self.frames[b].gradient();
        let m = linalg::inverse(&[ga, gb]).ok_or(Error::SingularPoint(x))?;
        let xi = [ls[a], ls[b]];
        let mut j = Jet4::zero(xi);
        add_log_term(&mut j, ls[a], [1.0, 0.0]);
        add_log_term(&mut j, ls[b], [0.0, 1.0]);
        for (k, f) in self.frames.iter().enumerate() {
            if k != a && k != b {
                let g = f.gradient();
                add_log_term(&mut j, ls[k], [g[0] * m[0][0] + g[1] * m[1][0], g[0] * m[0][1] + g[1] * m[1][1]]);
            }
        }
        let smooth = self.correction.jet(x).with_affine(self.affine_shift.c, self.affine_shift.g);
        Ok(j.plus(&smooth.pullback(xi, &m, 1.0)))
    }

    /// Value on the closed polygon, with `0 log 0 = 0` on the boundary.
    pub fn value_on_closure(&self, x: Vec2) -> Result<f64> {
        let scale = 1e-13 * (1.0 + self.polygon.diameter());
        let mut v = 0.0;
        for f in &self.frames {
            let l = f.eval(x);
            if l < -scale {
                return Err(Error::OutsideDomain(x));
            }
            if l > 0.0 {
                v += l * l.ln();
            }
        }
        Ok(v + self.correction.value(x) + self.affine_shift.eval(x))
    }
}

impl ConvexPotential for SymplecticPotential {
    fn jet(&self, x: Vec2) -> Result<Jet4> {
        let j = self.canonical_jet(x)?;
        let f = self.correction.jet(x);
        Ok(j.plus(&f).with_affine(self.affine_shift.c, self.affine_shift.g))
    }

    fn value(&self, x: Vec2) -> Result<f64> {
        let mut v = 0.0;
        for f in &self.frames {
            let l = f.eval(x);
            if l <= 0.0 || !l.is_finite() {
                return Err(Error::SingularPoint(x));
            }
            v += l * l.ln();
        }
        Ok(v + self.correction.value(x) + self.affine_shift.eval(x))
    }

    fn domain_margin(&self, x: Vec2) -> f64 {
        self.polygon.signed_distance(x)
    }

    fn adapted_jet(&self, x: Vec2) -> Result<Jet4> {
        self.edge_frame_jet(x)
    }
}

/// Add `l log l` for `l` with constant gradient `a` to a jet.
fn add_log_term(j: &mut Jet4, l: f64, a: Vec2) {
    let log_l = l.ln();
    let p1 = log_l + 1.0;
    let p2 = 1.0 / l;
    let p3 = -p2 * p2;
    let p4 = 2.0 * p2 * p2 * p2;
    j.value += l * log_l;
    for i in 0..2 {
        j.grad[i] += p1 * a[i];
        for k in 0..2 {
            j.hess[i][k] += p2 * a[i] * a[k];
        }
    }
    for q in 0..4 {
        j.third[q] += p3 * a[0].powi(3 - q as i32) * a[1].powi(q as i32);
    }
    for q in 0..5 {
        j.fourth[q] += p4 * a[0].powi(4 - q as i32) * a[1].powi(q as i32);
    }
}

/// Shorthand for `pot.jet(x)`.
pub fn eval_jet(pot: &SymplecticPotential, x: Vec2) -> Result<Jet4> {
    pot.jet(x)
}

/// Add the affine function making `u` and `grad u` vanish at the base point.
/// The correction polynomial is left untouched.
pub fn normalize(pot: &SymplecticPotential) -> Result<SymplecticPotential> {
    let x0 = pot.polygon.base_point();
    let bare = pot.clone().with_affine_shift(AffineShift::default());
    let j = bare.jet(x0)?;
    let g = [-j.grad[0], -j.grad[1]];
    let c = -j.value - linalg::dot(g, x0);
    Ok(bare.with_affine_shift(AffineShift { c, g }))
}

/// Dual coordinates `xi = grad u(x)`.
pub fn legendre_map<P: ConvexPotential + ?Sized>(pot: &P, x: Vec2) -> Result<Vec2> {
    pot.gradient(x)
}

/// Solve `grad u(x) = xi` by damped Newton from `guess`.
pub fn legendre_inverse<P: ConvexPotential + ?Sized>(pot: &P, xi: Vec2, guess: Vec2) -> Result<Vec2> {
    let mut x = guess;
    let mut j = pot.jet(x)?;
    let mut res = linalg::sub(j.grad, xi);
    for _ in 0..100 {
        let rn = linalg::norm(res);
        if rn <= 1e-14 * (1.0 + linalg::norm(xi)) {
            return Ok(x);
        }
        let inv = linalg::inverse(&j.hess).ok_or(Error::NotConvex { at: x, min_eig: 0.0 })?;
        let step = linalg::mat_vec(&inv, res);
        let mut alpha = 1.0;
        loop {
            let cand = linalg::sub(x, linalg::scale(alpha, step));
            if pot.domain_margin(cand) > 0.0 {
                if let Ok(jc) = pot.jet(cand) {
                    let rc = linalg::sub(jc.grad, xi);
                    if linalg::norm(rc) < rn || alpha < 1e-12 {
                        x = cand;
                        j = jc;
                        res = rc;
                        break;
                    }
                }
            }
            alpha *= 0.5;
            if alpha < 1e-16 {
                return Ok(x);
            }
        }
    }
    Ok(x)
}

/// Strictly convex quadratic `0.5 (x-c)^T Q (x-c) + offset` on the whole plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticPotential {
    pub hess: Mat2,
    pub center: Vec2,
    pub offset: f64,
}

impl QuadraticPotential {
    pub fn new(hess: Mat2, center: Vec2) -> Self {
        QuadraticPotential { hess, center, offset: 0.0 }
    }

    /// `|x|^2 / 2`
    pub fn standard() -> Self {
        Self::new(linalg::IDENTITY, [0.0, 0.0])
    }
}

impl ConvexPotential for QuadraticPotential {
    fn jet(&self, x: Vec2) -> Result<Jet4> {
        let d = linalg::sub(x, self.center);
        let g = linalg::mat_vec(&self.hess, d);
        let mut j = Jet4::zero(x);
        j.value = 0.5 * linalg::dot(d, g) + self.offset;
        j.grad = g;
        j.hess = self.hess;
        Ok(j)
    }

    fn domain_margin(&self, _x: Vec2) -> f64 {
        f64::INFINITY
    }
}

/// `u*(x) = t^{-1} u(sqrt(t) T x)` for `T` in SL(2).
#[derive(Debug, Clone)]
pub struct RescaledPotential<P> {
    pub inner: P,
    pub t: f64,
    pub unimodular: Mat2,
}

impl<P: ConvexPotential> RescaledPotential<P> {
    pub fn new(inner: P, t: f64, unimodular: Mat2) -> Result<Self> {
        if t <= 0.0 || !t.is_finite() {
            return Err(Error::Input(format!("scale t must be positive, got {t}")));
        }
        if (linalg::det(&unimodular) - 1.0).abs() > 1e-12 {
            return Err(Error::Input("T must have determinant 1".into()));
        }
        Ok(RescaledPotential { inner, t, unimodular })
    }

    pub fn map_matrix(&self) -> Mat2 {
        let s = self.t.sqrt();
        let m = self.unimodular;
        [[s * m[0][0], s * m[0][1]], [s * m[1][0], s * m[1][1]]]
    }

    /// Point of the original domain corresponding to `x`.
    pub fn forward(&self, x: Vec2) -> Vec2 {
        linalg::mat_vec(&self.map_matrix(), x)
    }

    /// Point of the rescaled domain corresponding to `y`.
    pub fn backward(&self, y: Vec2) -> Vec2 {
        let inv = linalg::inverse(&self.map_matrix()).expect("unimodular map is invertible");
        linalg::mat_vec(&inv, y)
    }
}

impl<P: ConvexPotential> ConvexPotential for RescaledPotential<P> {
    fn jet(&self, x: Vec2) -> Result<Jet4> {
        let m = self.map_matrix();
        let y = linalg::mat_vec(&m, x);
        let j = self.inner.jet(y)?;
        Ok(j.pullback(x, &m, 1.0 / self.t))
    }

    fn domain_margin(&self, x: Vec2) -> f64 {
        self.inner.domain_margin(self.forward(x))
    }

    fn adapted_jet(&self, x: Vec2) -> Result<Jet4> {
        Ok(self.inner.adapted_jet(self.forward(x))?.scaled(1.0 / self.t))
    }
}

/// Convexity sampling on the interior grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    /// Boundary clip; `None` means `1e-3 * diameter`.
    pub d_min: Option<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { n: 40, d_min: None }
    }
}

impl GridSpec {
    pub fn points(&self, poly: &Polygon) -> Vec<Vec2> {
        let d_min = self.d_min.unwrap_or(1e-3 * poly.diameter());
        poly.interior_grid(self.n, d_min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub min_eigenvalue: f64,
    pub argmin: Vec2,
    pub failing: Vec<Vec2>,
    pub points_checked: usize,
}

impl ConvexityReport {
    pub fn is_convex(&self) -> bool {
        self.failing.is_empty() && self.min_eigenvalue > 0.0
    }
}

pub fn convexity_audit(pot: &SymplecticPotential, grid: GridSpec) -> ConvexityReport {
    audit_points(pot, &grid.points(pot.polygon()))
}

pub fn audit_points<P: ConvexPotential + ?Sized>(pot: &P, points: &[Vec2]) -> ConvexityReport {
    let eigs: Vec<f64> =
        points.par_iter().map(|&x| pot.jet(x).map(|j| linalg::min_eigenvalue(&j.hess)).unwrap_or(f64::NEG_INFINITY)).collect();
    let mut min_eigenvalue = f64::INFINITY;
    let mut argmin = [f64::NAN; 2];
    let mut failing = Vec::new();
    for (x, e) in points.iter().zip(&eigs) {
        if *e < min_eigenvalue {
            min_eigenvalue = *e;
            argmin = *x;
        }
        if *e <= 0.0 {
            failing.push(*x);
        }
    }
    ConvexityReport { min_eigenvalue, argmin, failing, points_checked: points.len() }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_gold() -> SymplecticPotential {
        canonical_potential(&Polygon::unit_square())
    }

    fn xlogx(x: f64) -> f64 {
        x * x.ln()
    }

    #[test]
    fn canonical_square_matches_closed_form() {
        let u = square_gold();
        for x in [[0.2, 0.7], [0.5, 0.5], [0.9, 0.05]] {
            let expect = xlogx(x[0]) + xlogx(1.0 - x[0]) + xlogx(x[1]) + xlogx(1.0 - x[1]);
            assert!((u.value(x).unwrap() - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn canonical_simplex_matches_closed_form() {
        let u = canonical_potential(&Polygon::standard_simplex());
        let x = [0.2, 0.3];
        let expect = xlogx(0.2) + xlogx(0.3) + xlogx(0.5);
        assert!((u.value(x).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn canonical_big_square() {
        let u = canonical_potential(&Polygon::rectangle(2.0, 2.0));
        let x = [0.5, 1.5];
        let expect = xlogx(0.5) + xlogx(1.5) + xlogx(1.5) + xlogx(0.5);
        assert!((u.value(x).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn square_center_jet() {
        let j = square_gold().jet([0.5, 0.5]).unwrap();
        assert!((j.value + 2.0 * 2f64.ln()).abs() < 1e-15);
        assert!(j.grad[0].abs() < 1e-15 && j.grad[1].abs() < 1e-15);
        assert!((j.hess[0][0] - 4.0).abs() < 1e-14 && (j.hess[1][1] - 4.0).abs() < 1e-14);
        assert_eq!(j.hess[0][1], 0.0);
    }

    #[test]
    fn square_quarter_point_jet() {
        let j = square_gold().jet([0.25, 0.5]).unwrap();
        assert!((j.grad[0] - (1.0f64 / 3.0).ln()).abs() < 1e-15);
        assert!(j.grad[1].abs() < 1e-15);
        assert!((j.hess[0][0] - 16.0 / 3.0).abs() < 1e-14);
        assert!((j.hess[1][1] - 4.0).abs() < 1e-14);
        // third: -1/x^2 + 1/(1-x)^2 ; fourth: 2/x^3 + 2/(1-x)^3
        assert!((j.d3(0, 0, 0) - (-16.0 + 16.0 / 9.0)).abs() < 1e-12);
        assert!((j.d4(0, 0, 0, 0) - (128.0 + 2.0 / 0.421875)).abs() < 1e-10);
        assert_eq!(j.d3(0, 0, 1), 0.0);
    }

    #[test]
    fn boundary_points_are_singular() {
        let u = square_gold();
        assert!(matches!(u.jet([0.0, 0.5]), Err(Error::SingularPoint(_))));
        assert!(matches!(u.jet([1.5, 0.5]), Err(Error::SingularPoint(_))));
        assert!((u.value_on_closure([0.0, 0.5]).unwrap() - 2.0 * xlogx(0.5)).abs() < 1e-15);
    }

    #[test]
    fn normalization() {
        let u = normalize(&square_gold()).unwrap();
        assert!((u.affine_shift().c - 2.0 * 2f64.ln()).abs() < 1e-15);
        assert!(u.affine_shift().g[0].abs() < 1e-15);
        let j = u.jet([0.5, 0.5]).unwrap();
        assert!(j.value.abs() < 1e-15);
        let again = normalize(&u).unwrap();
        assert_eq!(again.affine_shift(), u.affine_shift());

        let s = normalize(&canonical_potential(&Polygon::standard_simplex())).unwrap();
        let x0 = [1.0 / 3.0, 1.0 / 3.0];
        // u0(x0) = 3 (1/3) log(1/3) and the gradient vanishes by symmetry
        assert!((s.affine_shift().c - 3f64.ln()).abs() < 1e-14);
        let j = s.jet(x0).unwrap();
        assert!(j.value.abs() < 1e-14 && j.grad[0].abs() < 1e-14 && j.grad[1].abs() < 1e-14);
    }

    #[test]
    fn legendre_map_values() {
        let u = square_gold();
        let xi = legendre_map(&u, [0.5, 0.5]).unwrap();
        assert!(xi[0].abs() < 1e-15 && xi[1].abs() < 1e-15);
        let xi = legendre_map(&u, [0.25, 0.5]).unwrap();
        assert!((xi[0] - (1.0f64 / 3.0).ln()).abs() < 1e-15);
        let q = QuadraticPotential::standard();
        assert_eq!(legendre_map(&q, [0.3, -2.0]).unwrap(), [0.3, -2.0]);
        let back = legendre_inverse(&u, [1.3, -0.4], [0.5, 0.5]).unwrap();
        let fwd = legendre_map(&u, back).unwrap();
        assert!((fwd[0] - 1.3).abs() < 1e-12 && (fwd[1] + 0.4).abs() < 1e-12);
    }

    #[test]
    fn audit_gold_and_destabilized() {
        let r = convexity_audit(&square_gold(), GridSpec { n: 41, d_min: None });
        assert!(r.is_convex());
        // eigenvalues 1/(x(1-x)), 1/(y(1-y)) reach 4 on the midlines, which hold grid points
        assert!((r.min_eigenvalue - 4.0).abs() < 1e-12);
        assert!(r.argmin.contains(&0.5));

        let bad = SymplecticPotential::with_monomials(&Polygon::unit_square(), 6, &[(2, 0, -3.0)]);
        let r = convexity_audit(&bad, GridSpec { n: 41, d_min: None });
        assert!(!r.is_convex());
        assert!(r.min_eigenvalue < 0.0);

        let r = convexity_audit(&canonical_potential(&Polygon::standard_simplex()), GridSpec::default());
        assert!(r.is_convex());
    }

    #[test]
    fn affine_shift_keeps_higher_derivatives() {
        let u = square_gold();
        let v = u.clone().with_affine_shift(AffineShift { c: 1.5, g: [0.3, -2.0] });
        let x = [0.31, 0.62];
        let a = u.jet(x).unwrap();
        let b = v.jet(x).unwrap();
        assert_eq!(a.hess, b.hess);
        assert_eq!(a.third, b.third);
        assert_eq!(a.fourth, b.fourth);
        assert!((b.value - a.value - 1.5 - 0.3 * 0.31 + 2.0 * 0.62).abs() < 1e-14);
    }

    #[test]
    fn rescaled_quadratic() {
        let q = QuadraticPotential::standard();
        let r = RescaledPotential::new(q, 4.0, [[2.0, 0.0], [0.0, 0.5]]).unwrap();
        let j = r.jet([0.3, 0.2]).unwrap();
        // u*(x) = (1/4) |2 T x|^2 / 2 = |T x|^2 / 2 -> hess = T^T T
        assert!((j.hess[0][0] - 4.0).abs() < 1e-14 && (j.hess[1][1] - 0.25).abs() < 1e-14);
        assert!(RescaledPotential::new(q, 1.0, [[2.0, 0.0], [0.0, 1.0]]).is_err());
    }
}
