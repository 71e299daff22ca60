//! Convex polygons carrying a piecewise-constant boundary measure.
//!
//! Edge `k` runs from vertex `k` to vertex `k + 1` (indices mod the vertex
//! count). The measure on edge `k` is `sigma[k]` times Euclidean arclength.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Vec2};

/// Cross products of consecutive edges at or below this are rejected.
pub const DEGENERACY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolygonFile", into = "PolygonFile")]
pub struct Polygon {
    vertices: Vec<Vec2>,
    edge_sigma: Vec<f64>,
    base_point: Vec2,
}

/// On-disk layout of a polygon.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolygonFile {
    pub vertices: Vec<Vec2>,
    pub sigma: Vec<f64>,
    pub base_point: Vec2,
}

impl TryFrom<PolygonFile> for Polygon {
    type Error = Error;

    fn try_from(f: PolygonFile) -> Result<Self> {
        Polygon::new(f.vertices, f.sigma, f.base_point)
    }
}

impl From<Polygon> for PolygonFile {
    fn from(p: Polygon) -> Self {
        PolygonFile { vertices: p.vertices, sigma: p.edge_sigma, base_point: p.base_point }
    }
}

fn invalid(invariant: &'static str, detail: impl Into<String>) -> Error {
    Error::InvalidPolygon { invariant, detail: detail.into() }
}

impl Polygon {
    pub fn new(vertices: Vec<Vec2>, edge_sigma: Vec<f64>, base_point: Vec2) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(invalid("vertex_count", format!("need at least 3 vertices, got {n}")));
        }
        if edge_sigma.len() != n {
            return Err(invalid("sigma_count", format!("{} sigma values for {n} edges", edge_sigma.len())));
        }
        let finite = vertices.iter().flatten().chain(edge_sigma.iter()).chain(base_point.iter());
        if finite.into_iter().any(|v| !v.is_finite()) {
            return Err(invalid("finite", "non-finite coordinate or density"));
        }
        if let Some((k, s)) = edge_sigma.iter().enumerate().find(|(_, s)| **s <= 0.0) {
            return Err(invalid("sigma_positive", format!("sigma[{k}] = {s}")));
        }
        for k in 0..n {
            let prev = vertices[(k + n - 1) % n];
            let cur = vertices[k];
            let next = vertices[(k + 1) % n];
            let c = linalg::cross(linalg::sub(cur, prev), linalg::sub(next, cur));
            if c <= DEGENERACY_TOL {
                return Err(invalid(
                    "strict_convexity",
                    format!("vertex {k}: cross product {c:e} (vertices must be strictly convex, counterclockwise)"),
                ));
            }
        }
        let poly = Polygon { vertices, edge_sigma, base_point };
        let d = poly.signed_distance(base_point);
        if d <= 0.0 {
            return Err(invalid("base_point_interior", format!("signed distance {d:e}")));
        }
        Ok(poly)
    }

    /// Unit square with unit densities, base point at the centre.
    pub fn unit_square() -> Self {
        Self::rectangle(1.0, 1.0)
    }

    pub fn rectangle(w: f64, h: f64) -> Self {
        Polygon::new(vec![[0.0, 0.0], [w, 0.0], [w, h], [0.0, h]], vec![1.0; 4], [0.5 * w, 0.5 * h]).expect("rectangle is valid")
    }

    /// Standard simplex with the density on the hypotenuse chosen so that
    /// its adapted defining function is `1 - x - y`.
    pub fn standard_simplex() -> Self {
        Polygon::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![1.0, std::f64::consts::FRAC_1_SQRT_2, 1.0], [1.0 / 3.0, 1.0 / 3.0])
            .expect("simplex is valid")
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn edge_sigma(&self) -> &[f64] {
        &self.edge_sigma
    }

    pub fn base_point(&self) -> Vec2 {
        self.base_point
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertex(&self, k: usize) -> Vec2 {
        self.vertices[k % self.vertices.len()]
    }

    pub fn edge(&self, k: usize) -> (Vec2, Vec2) {
        (self.vertex(k), self.vertex(k + 1))
    }

    pub fn with_base_point(&self, base_point: Vec2) -> Result<Self> {
        Polygon::new(self.vertices.clone(), self.edge_sigma.clone(), base_point)
    }

    pub fn with_sigma(&self, sigma: Vec<f64>) -> Result<Self> {
        Polygon::new(self.vertices.clone(), sigma, self.base_point)
    }

    /// Image under `x -> m x + shift`, with densities rescaled so that the
    /// adapted defining functions transform as functions (`l'(m x + s) = l(x)`).
    /// `m` must have positive determinant.
    pub fn affine_image(&self, m: &linalg::Mat2, shift: Vec2) -> Result<Self> {
        let map = |x: Vec2| linalg::add(linalg::mat_vec(m, x), shift);
        let frames = defining_functions(self);
        let verts: Vec<Vec2> = self.vertices.iter().map(|&v| map(v)).collect();
        let inv_t = linalg::transpose(&linalg::inverse(m).ok_or_else(|| Error::Input("singular affine map".into()))?);
        let sigma = frames
            .iter()
            .map(|f| {
                // gradient of l transforms by m^{-T}
                let g = linalg::mat_vec(&inv_t, f.gradient());
                1.0 / linalg::norm(g)
            })
            .collect();
        Polygon::new(verts, sigma, map(self.base_point))
    }

    /// Minimum over edges of the signed distance to the edge line; positive
    /// inside.
    pub fn signed_distance(&self, x: Vec2) -> f64 {
        let n = self.vertices.len();
        (0..n)
            .map(|k| {
                let (a, b) = self.edge(k);
                let e = linalg::sub(b, a);
                linalg::cross(e, linalg::sub(x, a)) / linalg::norm(e)
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, x: Vec2) -> bool {
        self.signed_distance(x) > 0.0
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for a in &self.vertices {
            for b in &self.vertices {
                d = d.max(linalg::norm(linalg::sub(*a, *b)));
            }
        }
        d
    }

    /// (min corner, max corner)
    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &self.vertices {
            for i in 0..2 {
                lo[i] = lo[i].min(v[i]);
                hi[i] = hi[i].max(v[i]);
            }
        }
        (lo, hi)
    }

    /// Cell centres of an `n x n` subdivision of the bounding box that lie at
    /// distance at least `d_min` from the boundary, ordered by x then y.
    pub fn interior_grid(&self, n: usize, d_min: f64) -> Vec<Vec2> {
        let (lo, hi) = self.bounding_box();
        let mut out = Vec::new();
        for i in 0..n {
            let x = lo[0] + (hi[0] - lo[0]) * (i as f64 + 0.5) / n as f64;
            for j in 0..n {
                let y = lo[1] + (hi[1] - lo[1]) * (j as f64 + 0.5) / n as f64;
                if self.signed_distance([x, y]) >= d_min {
                    out.push([x, y]);
                }
            }
        }
        out
    }

    /// Edge index and the foot of the perpendicular from `x` to the nearest
    /// edge line (ties resolved to the lowest index).
    pub fn nearest_edge(&self, x: Vec2) -> (usize, Vec2) {
        let frames = defining_functions(self);
        let mut best = (0, f64::INFINITY);
        for (k, f) in frames.iter().enumerate() {
            let d = f.distance(x);
            if d < best.1 {
                best = (k, d);
            }
        }
        let f = &frames[best.0];
        (best.0, linalg::sub(x, linalg::scale(best.1, f.inward_unit_normal)))
    }
}

/// Adapted defining function of one edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeFrame {
    pub inward_unit_normal: Vec2,
    /// `n . x - offset` is the signed distance to the edge line.
    pub offset: f64,
    pub sigma: f64,
    pub length: f64,
    pub start: Vec2,
    pub end: Vec2,
}

impl EdgeFrame {
    /// Signed Euclidean distance to the edge line.
    #[inline]
    pub fn distance(&self, x: Vec2) -> f64 {
        linalg::dot(self.inward_unit_normal, x) - self.offset
    }

    /// `l(x) = (n . x - c) / sigma`
    #[inline]
    pub fn eval(&self, x: Vec2) -> f64 {
        self.distance(x) / self.sigma
    }

    #[inline]
    pub fn gradient(&self) -> Vec2 {
        linalg::scale(1.0 / self.sigma, self.inward_unit_normal)
    }

    pub fn outward_normal(&self) -> Vec2 {
        linalg::scale(-1.0, self.inward_unit_normal)
    }

    pub fn point_at(&self, s: f64) -> Vec2 {
        linalg::lerp(self.start, self.end, s)
    }
}

pub fn defining_functions(poly: &Polygon) -> Vec<EdgeFrame> {
    (0..poly.len())
        .map(|k| {
            let (a, b) = poly.edge(k);
            let e = linalg::sub(b, a);
            let length = linalg::norm(e);
            let n = [-e[1] / length, e[0] / length];
            EdgeFrame { inward_unit_normal: n, offset: linalg::dot(n, a), sigma: poly.edge_sigma[k], length, start: a, end: b }
        })
        .collect()
}

/// Distance from `x` to the boundary. Fails for points outside the closed
/// polygon.
pub fn boundary_distance(poly: &Polygon, x: Vec2) -> Result<f64> {
    let d = poly.signed_distance(x);
    // allow rounding noise for points constructed on the boundary
    if d < -1e-14 * (1.0 + poly.diameter()) {
        return Err(Error::OutsideDomain(x));
    }
    Ok(d.max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measures {
    pub area: f64,
    pub boundary_volume: f64,
    /// The only constant forcing compatible with the boundary measure.
    pub a_const: f64,
}

pub fn measures_and_a(poly: &Polygon) -> Measures {
    let n = poly.len();
    let mut twice_area = 0.0;
    for k in 0..n {
        let (a, b) = poly.edge(k);
        twice_area += linalg::cross(a, b);
    }
    let area = 0.5 * twice_area;
    let boundary_volume: f64 = defining_functions(poly).iter().map(|f| f.sigma * f.length).sum();
    Measures { area, boundary_volume, a_const: boundary_volume / area }
}

/// Piecewise-linear function on the boundary with `db = sigma - tau`, where
/// `tau` is the flux of the radial field `(A/2)(x - origin)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFunction {
    /// Value at vertex `k`; `vertex_values[0] == 0`.
    pub vertex_values: Vec<f64>,
    /// Density of `sigma - tau` per unit length on each edge.
    pub density: Vec<f64>,
    pub lengths: Vec<f64>,
    pub vertices: Vec<Vec2>,
    pub origin: Vec2,
    /// `b` evaluated after a full loop (before the closure check).
    pub closure_error: f64,
}

pub fn boundary_b(poly: &Polygon, a: f64, origin: Vec2) -> Result<BoundaryFunction> {
    BoundaryFunction::from_densities(poly, poly.edge_sigma(), a, origin)
}

impl BoundaryFunction {
    /// Build `b` for an arbitrary per-edge density (which may be zero).
    pub fn from_densities(poly: &Polygon, sigma: &[f64], a: f64, origin: Vec2) -> Result<Self> {
        if sigma.len() != poly.len() {
            return Err(Error::Input("one density per edge required".into()));
        }
        let frames = defining_functions(poly);
        let mut vertex_values = Vec::with_capacity(poly.len());
        let mut density = Vec::with_capacity(poly.len());
        let mut lengths = Vec::with_capacity(poly.len());
        let mut b = 0.0;
        let mut scale = 0.0;
        for (f, &s) in frames.iter().zip(sigma) {
            vertex_values.push(b);
            // <x - origin, nu_out> is constant along the edge
            let radial = linalg::dot(linalg::sub(f.start, origin), f.outward_normal());
            let tau = 0.5 * a * radial;
            density.push(s - tau);
            lengths.push(f.length);
            b += (s - tau) * f.length;
            scale += (s.abs() + tau.abs()) * f.length;
        }
        let closure_error = b;
        if closure_error.abs() > 1e-12 * scale.max(1.0) {
            return Err(Error::Inconsistent(format!("boundary function does not close: loop increment {closure_error:e}")));
        }
        Ok(BoundaryFunction { vertex_values, density, lengths, vertices: poly.vertices().to_vec(), origin, closure_error })
    }

    /// Value at parameter `s in [0,1]` along edge `k`.
    pub fn eval_edge(&self, k: usize, s: f64) -> f64 {
        let k = k % self.vertex_values.len();
        self.vertex_values[k] + self.density[k] * self.lengths[k] * s
    }

    pub fn vertex_value(&self, k: usize) -> f64 {
        self.vertex_values[k % self.vertex_values.len()]
    }

    /// Value at a point on (or numerically near) the boundary, using the
    /// nearest edge.
    pub fn eval_at(&self, x: Vec2) -> f64 {
        let n = self.vertices.len();
        let mut best = (0, 0.0, f64::INFINITY);
        for k in 0..n {
            let a = self.vertices[k];
            let b = self.vertices[(k + 1) % n];
            let e = linalg::sub(b, a);
            let s = (linalg::dot(linalg::sub(x, a), e) / linalg::dot(e, e)).clamp(0.0, 1.0);
            let d = linalg::norm(linalg::sub(x, linalg::lerp(a, b, s)));
            if d < best.2 {
                best = (k, s, d);
            }
        }
        self.eval_edge(best.0, best.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn unit_square_defining_functions() {
        let p = Polygon::unit_square();
        let f = defining_functions(&p);
        let x = [0.3, 0.8];
        let expect = [x[1], 1.0 - x[0], 1.0 - x[1], x[0]];
        for (fr, e) in f.iter().zip(expect) {
            assert!(close(fr.eval(x), e, 1e-15));
        }
    }

    #[test]
    fn square_with_heavier_bottom_edge() {
        let p = Polygon::unit_square().with_sigma(vec![2.0, 1.0, 1.0, 1.0]).unwrap();
        let f = defining_functions(&p);
        assert!(close(f[0].eval([0.4, 0.6]), 0.3, 1e-15));
    }

    #[test]
    fn simplex_hypotenuse_is_one_minus_x_minus_y() {
        let p = Polygon::standard_simplex();
        let f = defining_functions(&p);
        // gradient of 1 - x - y has Euclidean length sqrt 2 = 1/sigma
        let g = f[1].gradient();
        assert!(close(g[0], -1.0, 1e-15) && close(g[1], -1.0, 1e-15));
        for x in [[0.1, 0.2], [0.5, 0.25], [0.0, 0.0]] {
            assert!(close(f[1].eval(x), 1.0 - x[0] - x[1], 1e-15));
        }
    }

    #[test]
    fn normal_derivative_is_inverse_sigma() {
        let p = Polygon::new(vec![[0.0, 0.0], [2.0, 0.2], [1.5, 1.7], [-0.4, 1.0]], vec![0.7, 1.3, 2.0, 0.5], [0.7, 0.7]).unwrap();
        for f in defining_functions(&p) {
            assert!(f.eval(p.base_point()) > 0.0);
            assert!(f.eval(f.start).abs() < 1e-14 && f.eval(f.end).abs() < 1e-14);
            assert!(close(linalg::dot(f.gradient(), f.inward_unit_normal), 1.0 / f.sigma, 1e-15));
        }
    }

    #[test]
    fn rejects_bad_polygons() {
        let cw = Polygon::new(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]], vec![1.0; 3], [0.2, 0.2]);
        assert!(matches!(cw, Err(Error::InvalidPolygon { invariant: "strict_convexity", .. })));
        let collinear = Polygon::new(vec![[0.0, 0.0], [0.5, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![1.0; 4], [0.2, 0.2]);
        assert!(matches!(collinear, Err(Error::InvalidPolygon { invariant: "strict_convexity", .. })));
        let outside = Polygon::unit_square().with_base_point([1.5, 0.5]);
        assert!(matches!(outside, Err(Error::InvalidPolygon { invariant: "base_point_interior", .. })));
        let neg = Polygon::unit_square().with_sigma(vec![1.0, -1.0, 1.0, 1.0]);
        assert!(matches!(neg, Err(Error::InvalidPolygon { invariant: "sigma_positive", .. })));
    }

    #[test]
    fn distances() {
        let sq = Polygon::unit_square();
        assert!(close(boundary_distance(&sq, [0.5, 0.5]).unwrap(), 0.5, 1e-15));
        assert!(close(boundary_distance(&sq, [0.1, 0.5]).unwrap(), 0.1, 1e-15));
        assert!(matches!(boundary_distance(&sq, [1.2, 0.5]), Err(Error::OutsideDomain(_))));
        let s = Polygon::standard_simplex();
        assert!(close(boundary_distance(&s, [0.25, 0.25]).unwrap(), 0.25, 1e-15));
        assert!(close(boundary_distance(&s, [0.4, 0.4]).unwrap(), 0.2 / SQRT_2, 1e-15));
    }

    #[test]
    fn measures() {
        let m = measures_and_a(&Polygon::unit_square());
        assert_eq!((m.area, m.boundary_volume, m.a_const), (1.0, 4.0, 4.0));
        let m = measures_and_a(&Polygon::standard_simplex());
        assert!(close(m.area, 0.5, 1e-15) && close(m.boundary_volume, 3.0, 1e-15));
        assert!(close(m.a_const, 6.0, 1e-14));
        let m = measures_and_a(&Polygon::rectangle(2.0, 2.0));
        assert_eq!((m.area, m.boundary_volume, m.a_const), (4.0, 8.0, 2.0));
    }

    #[test]
    fn square_boundary_function() {
        let b = boundary_b(&Polygon::unit_square(), 4.0, [0.0, 0.0]).unwrap();
        assert_eq!(b.vertex_values, vec![0.0, 1.0, 0.0, -1.0]);
        assert!(b.closure_error.abs() < 1e-12);
        assert!(close(b.eval_at([0.5, 0.0]), 0.5, 1e-15));
        assert!(close(b.eval_at([0.0, 0.25]), -0.25, 1e-15));
    }

    #[test]
    fn zero_data_gives_zero_b() {
        let p = Polygon::new(vec![[0.0, 0.0], [2.0, 0.2], [1.5, 1.7], [-0.4, 1.0]], vec![1.0; 4], [0.7, 0.7]).unwrap();
        let b = BoundaryFunction::from_densities(&p, &[0.0; 4], 0.0, [0.3, 0.1]).unwrap();
        assert!(b.vertex_values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn simplex_boundary_function_closed_form() {
        // Edge 0 (y=0): tau = 0, density 1 -> b(1,0) = 1.
        // Edge 1 (x+y=1): nu = (1,1)/sqrt2, <x,nu> = 1/sqrt2, tau = 3/sqrt2,
        //   density 1/sqrt2 - 3/sqrt2 = -sqrt2, length sqrt2 -> increment -2.
        // Edge 2 (x=0): tau = 0, density 1, length 1 -> back to 0.
        let b = boundary_b(&Polygon::standard_simplex(), 6.0, [0.0, 0.0]).unwrap();
        assert!(close(b.vertex_values[1], 1.0, 1e-14));
        assert!(close(b.vertex_values[2], -1.0, 1e-14));
        assert!(close(b.density[1], -SQRT_2, 1e-14));
    }

    #[test]
    fn inconsistent_a_does_not_close() {
        let r = boundary_b(&Polygon::unit_square(), 5.0, [0.0, 0.0]);
        assert!(matches!(r, Err(Error::Inconsistent(_))));
    }

    #[test]
    fn affine_image_transports_defining_functions() {
        let p = Polygon::standard_simplex();
        let m = [[1.3, 0.4], [-0.2, 0.9]];
        let s = [0.5, -1.0];
        let q = p.affine_image(&m, s).unwrap();
        let x = [0.2, 0.3];
        let y = linalg::add(linalg::mat_vec(&m, x), s);
        for (f, g) in defining_functions(&p).iter().zip(defining_functions(&q).iter()) {
            assert!(close(f.eval(x), g.eval(y), 1e-14));
        }
    }
}
