//! Quadrature rules: Gauss-Legendre, boundary-graded rules on polygons and
//! edges, a polar rule on discs, and Romberg integration.

use rayon::prelude::*;

use crate::error::Result;
use crate::linalg::{self, Vec2};
use crate::polytope::Polygon;

/// Nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Points with weights; integrals are summed in point order.
#[derive(Debug, Clone, Default)]
pub struct QuadRule {
    pub points: Vec<Vec2>,
    pub weights: Vec<f64>,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, f: impl Fn(Vec2) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }

    /// Parallel evaluation, sequential summation.
    pub fn integrate_par(&self, f: impl Fn(Vec2) -> Result<f64> + Sync) -> Result<f64> {
        let vals: Vec<f64> = self.points.par_iter().map(|x| f(*x)).collect::<Result<_>>()?;
        Ok(vals.iter().zip(&self.weights).map(|(v, w)| v * w).sum())
    }
}

/// Breakpoints of `[0, 1]` graded geometrically (ratio 1/2) toward the ends
/// selected by `left`/`right`.
fn graded_breaks(levels: usize, left: bool, right: bool) -> Vec<f64> {
    let mut b = vec![0.0];
    if left {
        for l in (1..=levels).rev() {
            b.push(0.5f64.powi(l as i32) * if right { 0.5 } else { 1.0 });
        }
    }
    if left && right {
        b.push(0.5);
    }
    if right {
        let start = if left { 2 } else { 1 };
        for l in start..=levels {
            b.push(1.0 - 0.5f64.powi(l as i32));
        }
    }
    b.push(1.0);
    b.dedup();
    b
}

fn interval_rule(breaks: &[f64], order: usize) -> Vec<(f64, f64)> {
    let (z, w) = gauss_legendre(order);
    let mut out = Vec::with_capacity((breaks.len() - 1) * order);
    for c in breaks.windows(2) {
        let (a, b) = (c[0], c[1]);
        let h = 0.5 * (b - a);
        for q in 0..order {
            out.push((a + h * (z[q] + 1.0), h * w[q]));
        }
    }
    out
}

/// Refinement depth of the boundary-graded rules. Cells halve toward the
/// boundary; the error on a log-singular integrand is of the order of the
/// last cell width, so the radial depth sets the attainable accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grading {
    pub radial_levels: usize,
    pub angular_levels: usize,
    pub order: usize,
}

impl Default for Grading {
    fn default() -> Self {
        Grading { radial_levels: 32, angular_levels: 16, order: 7 }
    }
}

impl Grading {
    pub fn uniform(levels: usize, order: usize) -> Self {
        Grading { radial_levels: levels, angular_levels: levels, order }
    }
}

/// Area rule on the fan of triangles from the base point, graded toward the
/// boundary edge (radial direction) and toward both corners (angular
/// direction).
pub fn graded_polygon_rule(poly: &Polygon, grading: Grading) -> QuadRule {
    let x0 = poly.base_point();
    let order = grading.order;
    let radial = interval_rule(&graded_breaks(grading.radial_levels, false, true), order);
    let angular = interval_rule(&graded_breaks(grading.angular_levels, true, true), order);
    let mut rule = QuadRule::default();
    for k in 0..poly.len() {
        let (a, b) = poly.edge(k);
        let ea = linalg::sub(a, x0);
        let eb = linalg::sub(b, x0);
        let jac = linalg::cross(ea, eb).abs();
        for &(s, ws) in &radial {
            for &(r, wr) in &angular {
                let p = linalg::add(x0, linalg::scale(s, linalg::lerp(ea, eb, r)));
                rule.points.push(p);
                rule.weights.push(ws * wr * s * jac);
            }
        }
    }
    rule
}

/// Ungraded rule on a convex polygon given by its vertices, fanned from the
/// vertex average. Exact for polynomials of degree below `order`.
pub fn fan_rule(vertices: &[Vec2], order: usize) -> QuadRule {
    let mut rule = QuadRule::default();
    let n = vertices.len();
    if n < 3 {
        return rule;
    }
    let mut c = [0.0; 2];
    for v in vertices {
        c = linalg::add(c, *v);
    }
    let c = linalg::scale(1.0 / n as f64, c);
    let (z, w) = gauss_legendre(order);
    let unit: Vec<(f64, f64)> = z.iter().zip(&w).map(|(z, w)| (0.5 * (z + 1.0), 0.5 * w)).collect();
    for k in 0..n {
        let ea = linalg::sub(vertices[k], c);
        let eb = linalg::sub(vertices[(k + 1) % n], c);
        let jac = linalg::cross(ea, eb).abs();
        for &(s, ws) in &unit {
            for &(r, wr) in &unit {
                rule.points.push(linalg::add(c, linalg::scale(s, linalg::lerp(ea, eb, r))));
                rule.weights.push(ws * wr * s * jac);
            }
        }
    }
    rule
}

/// Arclength rule on the segment `a -> b`, graded toward both ends.
pub fn graded_edge_rule(a: Vec2, b: Vec2, levels: usize, order: usize) -> QuadRule {
    let len = linalg::norm(linalg::sub(b, a));
    let mut rule = QuadRule::default();
    for (t, w) in interval_rule(&graded_breaks(levels, true, true), order) {
        rule.points.push(linalg::lerp(a, b, t));
        rule.weights.push(w * len);
    }
    rule
}

/// Boundary rule for `int f dsigma`, with each edge weighted by its density.
pub fn graded_boundary_rule(poly: &Polygon, levels: usize, order: usize) -> QuadRule {
    let mut rule = QuadRule::default();
    for k in 0..poly.len() {
        let (a, b) = poly.edge(k);
        let e = graded_edge_rule(a, b, levels, order);
        rule.points.extend(e.points);
        rule.weights.extend(e.weights.iter().map(|w| w * poly.edge_sigma()[k]));
    }
    rule
}

/// Polar rule on the disc of radius `radius`: Gauss in the radius on `n_r`
/// equal shells, trapezoid (exact for trigonometric polynomials) in the angle.
pub fn disc_rule(center: Vec2, radius: f64, n_r: usize, shells: usize, n_theta: usize) -> QuadRule {
    let breaks: Vec<f64> = (0..=shells).map(|i| i as f64 / shells as f64).collect();
    let radial = interval_rule(&breaks, n_r);
    let mut rule = QuadRule::default();
    let dt = 2.0 * std::f64::consts::PI / n_theta as f64;
    for &(s, ws) in &radial {
        let r = s * radius;
        for k in 0..n_theta {
            let t = (k as f64 + 0.5) * dt;
            rule.points.push([center[0] + r * t.cos(), center[1] + r * t.sin()]);
            rule.weights.push(ws * radius * r * dt);
        }
    }
    rule
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Romberg {
    pub value: f64,
    pub error: f64,
    pub levels: usize,
}

/// Romberg extrapolation of the trapezoid rule on `[a, b]`, stopping when
/// successive diagonal entries agree to `tol` (absolute).
pub fn romberg(f: impl Fn(f64) -> Result<f64>, a: f64, b: f64, tol: f64, max_levels: usize) -> Result<Romberg> {
    let h0 = b - a;
    let mut prev: Vec<f64> = vec![0.5 * h0 * (f(a)? + f(b)?)];
    let mut err = f64::INFINITY;
    for level in 1..max_levels {
        let n = 1usize << (level - 1);
        let h = h0 / n as f64;
        let mut mid = 0.0;
        for i in 0..n {
            mid += f(a + (i as f64 + 0.5) * h)?;
        }
        let mut row = vec![0.5 * prev[0] + 0.5 * h * mid];
        let mut p4 = 1.0;
        for k in 1..=level {
            p4 *= 4.0;
            let r = row[k - 1] + (row[k - 1] - prev[k - 1]) / (p4 - 1.0);
            row.push(r);
        }
        err = (row[level] - prev[level - 1]).abs();
        if level >= 3 && err <= tol {
            return Ok(Romberg { value: row[level], error: err, levels: level + 1 });
        }
        prev = row;
    }
    Ok(Romberg { value: *prev.last().unwrap(), error: err, levels: max_levels })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_exactness() {
        for n in 1..=10 {
            let (z, w) = gauss_legendre(n);
            for p in 0..(2 * n) {
                let q: f64 = z.iter().zip(&w).map(|(z, w)| w * z.powi(p as i32)).sum();
                let exact = if p % 2 == 1 { 0.0 } else { 2.0 / (p as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-14, "n={n} p={p}");
            }
        }
    }

    #[test]
    fn polygon_rule_area_and_moments() {
        let sq = Polygon::unit_square();
        let r = graded_polygon_rule(&sq, Grading::uniform(12, 7));
        assert!((r.total_weight() - 1.0).abs() < 1e-13);
        // twelve halvings leave an O(2^-12) error on log singularities
        let v = r.integrate(|x| (x[0] * (1.0 - x[0])).ln() + (x[1] * (1.0 - x[1])).ln());
        assert!((v + 4.0).abs() < 1e-5 && (v + 4.0).abs() > 1e-7, "{v}");
        let r = graded_polygon_rule(&sq, Grading::default());
        assert!((r.integrate(|x| x[0] * x[0] * x[1]) - 1.0 / 6.0).abs() < 1e-13);
        // int_0^1 log(x(1-x)) dx = -2 per direction
        let v = r.integrate(|x| (x[0] * (1.0 - x[0])).ln() + (x[1] * (1.0 - x[1])).ln());
        assert!((v + 4.0).abs() < 1e-10, "{v}");
        let s = Polygon::standard_simplex();
        let r = graded_polygon_rule(&s, Grading::uniform(8, 5));
        assert!((r.total_weight() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn fan_rule_is_exact_for_polynomials() {
        let tri = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let r = fan_rule(&tri, 6);
        // int x^2 y^3 over the simplex = 2! 3! / 7!
        assert!((r.integrate(|x| x[0].powi(2) * x[1].powi(3)) - 12.0 / 5040.0).abs() < 1e-16);
    }

    #[test]
    fn edge_and_boundary_rules() {
        let e = graded_edge_rule([0.0, 0.0], [3.0, 4.0], 10, 5);
        assert!((e.total_weight() - 5.0).abs() < 1e-13);
        let b = graded_boundary_rule(&Polygon::standard_simplex(), 10, 5);
        assert!((b.total_weight() - 3.0).abs() < 1e-13);
        // x log x on [0, 1] integrates to -1/4
        let v = graded_edge_rule([0.0, 0.0], [1.0, 0.0], 40, 7).integrate(|x| x[0] * x[0].ln().max(-1e300));
        assert!((v + 0.25).abs() < 1e-12);
    }

    #[test]
    fn disc_rule_moments() {
        let d = disc_rule([1.0, -1.0], 0.5, 6, 2, 32);
        assert!((d.total_weight() - std::f64::consts::PI * 0.25).abs() < 1e-13);
        let m = d.integrate(|x| (x[0] - 1.0).powi(2));
        assert!((m - std::f64::consts::PI * 0.5f64.powi(4) / 4.0).abs() < 1e-13);
    }

    #[test]
    fn romberg_smooth() {
        let r = romberg(|t| Ok(t.exp()), 0.0, 1.0, 1e-13, 20).unwrap();
        assert!((r.value - (1f64.exp() - 1.0)).abs() < 1e-13);
    }
}
