//! The conjugate function `H` of a two-dimensional solution with constant
//! `A`: the stream function of the divergence-free field
//! `w = v - (A/2)(x - origin)`, so that `grad H = (-w2, w1)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{point_state, vector_fields};
use crate::error::{Error, Result};
use crate::linalg::{self, Vec2};
use crate::polytope::{BoundaryFunction, Polygon};
use crate::potential::ConvexPotential;
use crate::quadrature::{gauss_legendre, romberg};

/// Absolute tolerance of the Romberg line integrals defining `H`.
const PATH_TOL: f64 = 1e-13;
const PATH_LEVELS: usize = 22;

/// `H` evaluated on demand by integrating `grad H` along the segment from
/// the base point.
pub struct Conjugate<'a, P: ?Sized> {
    pub pot: &'a P,
    pub a: f64,
    pub origin: Vec2,
    pub base_point: Vec2,
}

impl<'a, P: ConvexPotential + ?Sized> Conjugate<'a, P> {
    pub fn new(pot: &'a P, a: f64, origin: Vec2, base_point: Vec2) -> Self {
        Conjugate { pot, a, origin, base_point }
    }

    pub fn w(&self, x: Vec2) -> Result<Vec2> {
        Ok(vector_fields(&point_state(self.pot, x)?, self.a, self.origin).w)
    }

    pub fn grad(&self, x: Vec2) -> Result<Vec2> {
        let w = self.w(x)?;
        Ok([-w[1], w[0]])
    }

    pub fn value(&self, x: Vec2) -> Result<f64> {
        let d = linalg::sub(x, self.base_point);
        if linalg::norm(d) == 0.0 {
            return Ok(0.0);
        }
        let r = romberg(
            |s| Ok(linalg::dot(self.grad(linalg::add(self.base_point, linalg::scale(s, d)))?, d)),
            0.0,
            1.0,
            PATH_TOL,
            PATH_LEVELS,
        )?;
        Ok(r.value)
    }

    /// `U^{ij} H_ij` from second central differences of `H` with step `h`.
    pub fn q_residual(&self, x: Vec2, h: f64) -> Result<f64> {
        let st = point_state(self.pot, x)?;
        let f = |dx: f64, dy: f64| self.value([x[0] + dx, x[1] + dy]);
        let c = f(0.0, 0.0)?;
        let hxx = (f(h, 0.0)? - 2.0 * c + f(-h, 0.0)?) / (h * h);
        let hyy = (f(0.0, h)? - 2.0 * c + f(0.0, -h)?) / (h * h);
        let hxy = (f(h, h)? - f(h, -h)? - f(-h, h)? + f(-h, -h)?) / (4.0 * h * h);
        let u = st.cofactor;
        Ok(u[0][0] * hxx + 2.0 * u[0][1] * hxy + u[1][1] * hyy)
    }

    /// Circulation of `grad H` around the axis-aligned rectangle `lo..hi`.
    pub fn circulation(&self, lo: Vec2, hi: Vec2) -> Result<f64> {
        let (z, w) = gauss_legendre(20);
        let corners = [lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]];
        let mut total = 0.0;
        for k in 0..4 {
            let a = corners[k];
            let b = corners[(k + 1) % 4];
            let e = linalg::sub(b, a);
            for (zi, wi) in z.iter().zip(&w) {
                let p = linalg::lerp(a, b, 0.5 * (zi + 1.0));
                total += 0.5 * wi * linalg::dot(self.grad(p)?, e);
            }
        }
        Ok(total)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianField {
    pub points: Vec<Vec2>,
    pub values: Vec<f64>,
    pub w: Vec<Vec2>,
    /// `L + (A/2) h` with `L = log det` and `h = u - x . grad u`.
    pub l_tilde: Vec<f64>,
    pub origin: Vec2,
    pub a: f64,
    /// Largest `|circulation| / perimeter` over the sampled rectangles.
    pub loop_closure: f64,
    pub rectangles: usize,
    /// Largest `|U^{ij} H_ij|` over points at distance >= `q_clip`.
    pub q_residual: f64,
    pub q_clip: f64,
    pub sup_grad_h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianConfig {
    pub rectangles: usize,
    pub seed: u64,
    pub q_step: f64,
    pub q_clip: f64,
}

impl Default for HamiltonianConfig {
    fn default() -> Self {
        HamiltonianConfig { rectangles: 200, seed: 0x5eed, q_step: 1e-3, q_clip: 0.05 }
    }
}

/// Random axis-aligned rectangles with all corners at distance >= `margin`.
fn random_rectangles(poly: &Polygon, count: usize, seed: u64, margin: f64) -> Vec<(Vec2, Vec2)> {
    let (lo, hi) = poly.bounding_box();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count && attempts < 1000 * count.max(1) {
        attempts += 1;
        let p = [rng.random_range(lo[0]..hi[0]), rng.random_range(lo[1]..hi[1])];
        let q = [rng.random_range(lo[0]..hi[0]), rng.random_range(lo[1]..hi[1])];
        let a = [p[0].min(q[0]), p[1].min(q[1])];
        let b = [p[0].max(q[0]), p[1].max(q[1])];
        if b[0] - a[0] < 1e-3 || b[1] - a[1] < 1e-3 {
            continue;
        }
        let corners = [a, [b[0], a[1]], b, [a[0], b[1]]];
        if corners.iter().all(|c| poly.signed_distance(*c) >= margin) {
            out.push((a, b));
        }
    }
    out
}

pub fn hamiltonian<P: ConvexPotential + ?Sized>(
    pot: &P,
    poly: &Polygon,
    a: f64,
    origin: Vec2,
    points: &[Vec2],
    config: HamiltonianConfig,
) -> Result<HamiltonianField> {
    if !a.is_finite() {
        return Err(Error::Input("the conjugate function needs a finite constant A".into()));
    }
    for p in points {
        if poly.signed_distance(*p) <= 0.0 {
            return Err(Error::Geometry(format!("grid point ({}, {}) is not interior", p[0], p[1])));
        }
    }
    let conj = Conjugate::new(pot, a, origin, poly.base_point());
    let per_point: Vec<(f64, Vec2, f64)> = points
        .par_iter()
        .map(|&x| {
            let st = point_state(pot, x)?;
            let vf = vector_fields(&st, a, origin);
            Ok((conj.value(x)?, vf.w, st.log_det + 0.5 * a * vf.h))
        })
        .collect::<Result<_>>()?;
    let rects = random_rectangles(poly, config.rectangles, config.seed, 0.02 * poly.diameter());
    let closures: Vec<f64> = rects
        .par_iter()
        .map(|(lo, hi)| {
            let per = 2.0 * ((hi[0] - lo[0]) + (hi[1] - lo[1]));
            Ok(conj.circulation(*lo, *hi)?.abs() / per)
        })
        .collect::<Result<_>>()?;
    let q_points: Vec<Vec2> = points.iter().copied().filter(|p| poly.signed_distance(*p) >= config.q_clip).collect();
    let q_vals: Vec<f64> = q_points.par_iter().map(|&x| conj.q_residual(x, config.q_step)).collect::<Result<_>>()?;
    let sup_grad_h = per_point.iter().map(|(_, w, _)| linalg::norm(*w)).fold(0.0, f64::max);
    Ok(HamiltonianField {
        points: points.to_vec(),
        values: per_point.iter().map(|t| t.0).collect(),
        w: per_point.iter().map(|t| t.1).collect(),
        l_tilde: per_point.iter().map(|t| t.2).collect(),
        origin,
        a,
        loop_closure: closures.iter().copied().fold(0.0, f64::max),
        rectangles: rects.len(),
        q_residual: q_vals.iter().map(|v| v.abs()).fold(0.0, f64::max),
        q_clip: config.q_clip,
        sup_grad_h,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryComparison {
    /// Sup deviation of the extrapolated `H` from `b` after the best
    /// constant shift.
    pub deviation: f64,
    pub shift: f64,
    /// Extrapolated `H` at each vertex, after the shift.
    pub vertex_values: Vec<f64>,
    /// `(edge, parameter, extrapolated H, b)` at edge samples.
    pub edge_samples: Vec<(usize, f64, f64, f64)>,
    /// Largest gap between the two extrapolations of each sample, as a
    /// divergence flag.
    pub extrapolation_spread: f64,
}

/// Quadratic extrapolation to distance 0 from samples at `d, d/2, d/4`.
fn extrapolate(f: impl Fn(f64) -> Result<f64>, d: f64) -> Result<(f64, f64)> {
    let (a, b, c) = (f(d)?, f(0.5 * d)?, f(0.25 * d)?);
    let linear = 2.0 * c - b;
    let quad = (8.0 * c - 6.0 * b + a) / 3.0;
    Ok((quad, (quad - linear).abs()))
}

/// Compare the boundary limit of `H` with `b`, approaching edge quarter
/// points along the inward normal and vertices along the ray to the base
/// point.
pub fn boundary_compare<P: ConvexPotential + ?Sized>(
    conj: &Conjugate<'_, P>,
    poly: &Polygon,
    b: &BoundaryFunction,
) -> Result<BoundaryComparison> {
    let d = 1e-2 * poly.diameter();
    let frames = crate::polytope::defining_functions(poly);
    let mut raw = Vec::new();
    let mut spread: f64 = 0.0;
    for (k, f) in frames.iter().enumerate() {
        for s in [0.25, 0.5, 0.75] {
            let foot = f.point_at(s);
            let n = f.inward_unit_normal;
            let (h, sp) = extrapolate(|t| conj.value(linalg::add(foot, linalg::scale(t, n))), d)?;
            spread = spread.max(sp);
            raw.push((k, s, h, b.eval_edge(k, s)));
        }
    }
    let x0 = poly.base_point();
    let mut vertex_raw = Vec::new();
    for (k, v) in poly.vertices().iter().enumerate() {
        let dir = linalg::sub(x0, *v);
        let dir = linalg::scale(1.0 / linalg::norm(dir), dir);
        let (h, sp) = extrapolate(|t| conj.value(linalg::add(*v, linalg::scale(t, dir))), d)?;
        spread = spread.max(sp);
        vertex_raw.push((h, b.vertex_value(k)));
    }
    let diffs: Vec<f64> = raw.iter().map(|r| r.2 - r.3).chain(vertex_raw.iter().map(|(h, bv)| h - bv)).collect();
    let lo = diffs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = diffs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shift = 0.5 * (lo + hi);
    Ok(BoundaryComparison {
        deviation: 0.5 * (hi - lo),
        shift,
        vertex_values: vertex_raw.iter().map(|(h, _)| h - shift).collect(),
        edge_samples: raw.into_iter().map(|(k, s, h, bv)| (k, s, h - shift, bv)).collect(),
        extrapolation_spread: spread,
    })
}

/// Largest gradient norm of the affine interpolant of `b` through three
/// vertices, over all non-collinear vertex triples.
pub fn three_point_k(b: &BoundaryFunction) -> f64 {
    let v = &b.vertices;
    let n = v.len();
    let scale = v.iter().fold(0.0_f64, |m, p| m.max(p[0].abs()).max(p[1].abs())).max(1.0);
    let mut k: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            for l in (j + 1)..n {
                let e1 = linalg::sub(v[j], v[i]);
                let e2 = linalg::sub(v[l], v[i]);
                let det = linalg::cross(e1, e2);
                if det.abs() <= 1e-14 * scale * scale {
                    continue;
                }
                let r1 = b.vertex_value(j) - b.vertex_value(i);
                let r2 = b.vertex_value(l) - b.vertex_value(i);
                // g . e1 = r1, g . e2 = r2
                let g = [(r1 * e2[1] - r2 * e1[1]) / det, (e1[0] * r2 - e2[0] * r1) / det];
                k = k.max(linalg::norm(g));
            }
        }
    }
    k
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VBoundReport {
    pub k: f64,
    pub sup_w: f64,
    pub sup_v: f64,
    /// `K + (A/2) max |x - origin|` over the polygon.
    pub v_bound: f64,
    pub tolerance: f64,
    pub holds: bool,
}

pub fn v_bound_check<P: ConvexPotential + ?Sized>(
    pot: &P,
    poly: &Polygon,
    a: f64,
    origin: Vec2,
    k: f64,
    points: &[Vec2],
) -> Result<VBoundReport> {
    let vals: Vec<(f64, f64)> = points
        .par_iter()
        .map(|&x| {
            let vf = vector_fields(&point_state(pot, x)?, a, origin);
            Ok((linalg::norm(vf.w), linalg::norm(vf.v)))
        })
        .collect::<Result<_>>()?;
    let sup_w = vals.iter().map(|t| t.0).fold(0.0, f64::max);
    let sup_v = vals.iter().map(|t| t.1).fold(0.0, f64::max);
    let reach = poly.vertices().iter().map(|p| linalg::norm(linalg::sub(*p, origin))).fold(0.0, f64::max);
    let v_bound = k + 0.5 * a.abs() * reach;
    let tolerance = 1e-6;
    Ok(VBoundReport { k, sup_w, sup_v, v_bound, tolerance, holds: sup_w <= k + tolerance && sup_v <= v_bound + tolerance })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub pairs: usize,
    pub k: f64,
    /// Largest `|L(x) - L(y)| - K |grad u(x) - grad u(y)|`; non-positive when
    /// every pair satisfies the inequality.
    pub worst_margin: f64,
    pub holds: bool,
}

/// `|L(x) - L(y)| <= K |grad u(x) - grad u(y)|` with `L = log det`.
pub fn l_transfer_check<P: ConvexPotential + ?Sized>(pot: &P, k: f64, pairs: &[(Vec2, Vec2)]) -> Result<TransferReport> {
    let margins: Vec<f64> = pairs
        .par_iter()
        .map(|&(x, y)| {
            let a = point_state(pot, x)?;
            let b = point_state(pot, y)?;
            let dl = (a.log_det - b.log_det).abs();
            let dg = linalg::norm(linalg::sub(a.jet.grad, b.jet.grad));
            Ok(dl - k * dg)
        })
        .collect::<Result<_>>()?;
    let worst_margin = margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(TransferReport {
        pairs: pairs.len(),
        k,
        worst_margin: if pairs.is_empty() { 0.0 } else { worst_margin },
        holds: margins.iter().all(|m| *m <= 1e-12),
    })
}

/// Random interior point pairs at distance >= `margin` from the boundary.
pub fn random_pairs(poly: &Polygon, count: usize, seed: u64, margin: f64) -> Vec<(Vec2, Vec2)> {
    let (lo, hi) = poly.bounding_box();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || loop {
        let p = [rng.random_range(lo[0]..hi[0]), rng.random_range(lo[1]..hi[1])];
        if poly.signed_distance(p) >= margin {
            return p;
        }
    };
    (0..count).map(|_| (draw(), draw())).collect()
}
