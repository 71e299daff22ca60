//! Sections `S_x(t) = { y : H_x(y) < t }` of a convex potential, where
//! `H_x(y) = u(y) - u(x) - grad u(x) . (y - x)`, together with their
//! normalization by unimodular affine maps and the rescaling laws.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{curvature_tensors, point_state};
use crate::ellipse::{min_enclosing_ellipse, Ellipse};
use crate::error::{Error, Result};
use crate::jet::Jet4;
use crate::linalg::{self, Mat2, Vec2};
use crate::polytope::Polygon;
use crate::potential::{ConvexPotential, RescaledPotential};

pub const DEFAULT_RAYS: usize = 128;
/// Absolute tolerance on `H_x - t` at each boundary root.
pub const ROOT_TOL: f64 = 1e-10;
/// Inner radius required of a normalized convex set, `n^{-3/2}` for `n = 2`.
pub const ALPHA_2: f64 = 0.353_553_390_593_273_8;

fn h_from_jet(jx: &Jet4, uy: f64, y: Vec2) -> f64 {
    uy - jx.value - linalg::dot(jx.grad, linalg::sub(y, jx.location))
}

pub fn h_distance<P: ConvexPotential + ?Sized>(pot: &P, x: Vec2, y: Vec2) -> Result<f64> {
    let jx = pot.jet(x)?;
    Ok(h_from_jet(&jx, pot.value(y)?, y))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub center: Vec2,
    pub level: f64,
    /// Boundary points in ray order, counter-clockwise from angle 0.
    pub boundary: Vec<Vec2>,
    pub radii: Vec<f64>,
    /// Area from the periodic trapezoid rule on `r(theta)^2 / 2`.
    pub volume: f64,
    /// Smallest domain margin over the boundary points.
    pub margin: f64,
}

impl Section {
    /// Whether the boundary polyline turns left at every vertex.
    pub fn is_convex(&self) -> bool {
        let b = &self.boundary;
        let n = b.len();
        let scale = self.radii.iter().copied().fold(0.0, f64::max).powi(2);
        (0..n).all(|k| {
            let e1 = linalg::sub(b[(k + 1) % n], b[k]);
            let e2 = linalg::sub(b[(k + 2) % n], b[(k + 1) % n]);
            linalg::cross(e1, e2) >= -1e-12 * scale
        })
    }

    pub fn shoelace_area(&self) -> f64 {
        let b = &self.boundary;
        let n = b.len();
        0.5 * (0..n).map(|k| linalg::cross(b[k], b[(k + 1) % n])).sum::<f64>()
    }

    /// Whether `y` lies in the closed polygon traced by the rays.
    pub fn contains(&self, y: Vec2) -> bool {
        let d = linalg::sub(y, self.center);
        let r = linalg::norm(d);
        if r == 0.0 {
            return true;
        }
        let n = self.radii.len();
        let step = std::f64::consts::TAU / n as f64;
        let theta = d[1].atan2(d[0]).rem_euclid(std::f64::consts::TAU);
        let k = ((theta / step).floor() as usize).min(n - 1);
        let a = self.boundary[k];
        let b = self.boundary[(k + 1) % n];
        linalg::cross(linalg::sub(b, a), linalg::sub(y, a)) >= 0.0
    }
}

struct RayRoot {
    radius: f64,
    margin: f64,
}

fn ray_root<P: ConvexPotential + ?Sized>(pot: &P, jx: &Jet4, dir: Vec2, t: f64, r0: f64) -> Result<RayRoot> {
    let x = jx.location;
    let at = |r: f64| linalg::add(x, linalg::scale(r, dir));
    let h = |r: f64| -> Result<f64> {
        let y = at(r);
        Ok(h_from_jet(jx, pot.value(y)?, y))
    };
    let mut lo = 0.0;
    let mut r = r0;
    let mut hi = None;
    for _ in 0..200 {
        if pot.domain_margin(at(r)) <= 0.0 {
            // locate the last interior point on the ray
            let (mut a, mut b) = (lo, r);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                if pot.domain_margin(at(m)) > 0.0 && h(m).is_ok() {
                    a = m;
                } else {
                    b = m;
                }
            }
            if a > lo && h(a)? >= t {
                hi = Some(a);
                break;
            }
            return Err(Error::NonCompactSection { level: t });
        }
        if h(r)? >= t {
            hi = Some(r);
            break;
        }
        lo = r;
        r *= 2.0;
    }
    let mut hi = hi.ok_or(Error::NonCompactSection { level: t })?;
    // safeguarded Newton on the bracket [lo, hi]
    let mut r = hi;
    for _ in 0..200 {
        let y = at(r);
        let j = pot.jet(y)?;
        let f = h_from_jet(jx, j.value, y) - t;
        if f.abs() <= ROOT_TOL {
            break;
        }
        if f > 0.0 {
            hi = r;
        } else {
            lo = r;
        }
        let slope = linalg::dot(linalg::sub(j.grad, jx.grad), dir);
        let newton = r - f / slope;
        r = if slope > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    Ok(RayRoot { radius: r, margin: pot.domain_margin(at(r)) })
}

pub fn section_boundary<P: ConvexPotential + ?Sized>(pot: &P, x: Vec2, t: f64, rays: usize) -> Result<Section> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Input(format!("section level must be positive, got {t}")));
    }
    if rays < 3 {
        return Err(Error::Input(format!("need at least 3 rays, got {rays}")));
    }
    let jx = pot.jet(x)?;
    let lam = linalg::max_eigenvalue(&jx.hess);
    let r0 = 0.5 * (2.0 * t / lam).sqrt();
    let step = std::f64::consts::TAU / rays as f64;
    let roots: Vec<RayRoot> = (0..rays)
        .into_par_iter()
        .map(|k| {
            let th = k as f64 * step;
            ray_root(pot, &jx, [th.cos(), th.sin()], t, r0)
        })
        .collect::<Result<_>>()?;
    let boundary = roots
        .iter()
        .enumerate()
        .map(|(k, rr)| {
            let th = k as f64 * step;
            linalg::add(x, linalg::scale(rr.radius, [th.cos(), th.sin()]))
        })
        .collect();
    let radii: Vec<f64> = roots.iter().map(|r| r.radius).collect();
    let volume = 0.5 * step * radii.iter().map(|r| r * r).sum::<f64>();
    let margin = roots.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    Ok(Section { center: x, level: t, boundary, radii, volume, margin })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Modulus {
    pub value: f64,
    pub argmin_x: Vec2,
    pub argmin_y: Vec2,
    pub inner_samples: usize,
    pub outer_samples: usize,
}

/// `min_{x in inner} min_{y in outer} H_x(y)` over explicit samples.
pub fn modulus_points<P: ConvexPotential + ?Sized>(pot: &P, inner: &[Vec2], outer: &[Vec2]) -> Result<Modulus> {
    if inner.is_empty() || outer.is_empty() {
        return Err(Error::Input("modulus needs nonempty sample sets".into()));
    }
    let values: Vec<f64> = outer.par_iter().map(|y| pot.value(*y)).collect::<Result<_>>()?;
    let best: Vec<(f64, Vec2, Vec2)> = inner
        .par_iter()
        .map(|&x| {
            let jx = pot.jet(x)?;
            Ok(outer.iter().zip(&values).map(|(y, uy)| (h_from_jet(&jx, *uy, *y), x, *y)).fold((f64::INFINITY, x, x), |a, b| {
                if b.0 < a.0 {
                    b
                } else {
                    a
                }
            }))
        })
        .collect::<Result<_>>()?;
    let (value, argmin_x, argmin_y) = best.into_iter().fold((f64::INFINITY, [0.0; 2], [0.0; 2]), |a, b| if b.0 < a.0 { b } else { a });
    Ok(Modulus { value, argmin_x, argmin_y, inner_samples: inner.len(), outer_samples: outer.len() })
}

/// Modulus of convexity of the pair `inner ⊂⊂ outer`, sampling `inner` on
/// an `n x n` grid plus its vertices and `outer`'s boundary with `n` points
/// per edge.
pub fn modulus<P: ConvexPotential + ?Sized>(pot: &P, inner: &Polygon, outer: &Polygon, n: usize) -> Result<Modulus> {
    if n == 0 {
        return Err(Error::Input("modulus sampling must be positive".into()));
    }
    if inner.vertices().iter().any(|v| outer.signed_distance(*v) <= 0.0) {
        return Err(Error::Input("inner set is not compactly inside the outer set".into()));
    }
    if outer.vertices().iter().any(|v| pot.domain_margin(*v) <= 0.0) {
        return Err(Error::Input("outer set is not compactly inside the domain".into()));
    }
    let mut xs = inner.interior_grid(n, 0.0);
    xs.extend_from_slice(inner.vertices());
    let ys: Vec<Vec2> = (0..outer.len())
        .flat_map(|k| {
            let (a, b) = outer.edge(k);
            (0..n).map(move |i| linalg::lerp(a, b, i as f64 / n as f64))
        })
        .collect();
    modulus_points(pot, &xs, &ys)
}

/// `K = k t^{-1/2} T^{-1}(S - center)` is the normalized image of a section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationMap {
    pub unimodular: Mat2,
    pub scale: f64,
    pub center: Vec2,
    pub level: f64,
    pub ellipse: Ellipse,
    /// Radius of the largest origin-centred disc inside the image.
    pub inner_radius: f64,
    /// Largest norm of an image boundary point.
    pub outer_radius: f64,
    pub alpha_target: f64,
    pub meets_alpha: bool,
    pub inside_unit_ball: bool,
}

impl NormalizationMap {
    pub fn apply(&self, y: Vec2) -> Vec2 {
        let inv = linalg::inverse(&self.unimodular).expect("unimodular");
        let f = self.scale / self.level.sqrt();
        linalg::scale(f, linalg::mat_vec(&inv, linalg::sub(y, self.center)))
    }
}

/// Distance from the origin to the nearest edge line of a convex polygon
/// that contains it, negative if it does not.
fn inner_radius(poly: &[Vec2]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|k| {
            let a = poly[k];
            let b = poly[(k + 1) % n];
            let e = linalg::sub(b, a);
            linalg::cross(e, linalg::scale(-1.0, a)) / linalg::norm(e)
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn normalize_section(section: &Section) -> Result<NormalizationMap> {
    let fit = min_enclosing_ellipse(&section.boundary, 1e-9)?;
    let e = fit.ellipse;
    let (len, dir) = e.axes();
    if !(len[1] > 1e-12 * len[0]) {
        return Err(Error::Conditioning("section is nearly a segment".into()));
    }
    let mut e1 = dir[0];
    // near-circular ellipses have no preferred axes
    if (len[0] - len[1]) <= 1e-6 * len[0] {
        e1 = [1.0, 0.0];
    }
    if e1[0] < 0.0 || (e1[0] == 0.0 && e1[1] < 0.0) {
        e1 = linalg::scale(-1.0, e1);
    }
    let e2 = [-e1[1], e1[0]];
    let stretch = (len[0] / len[1]).sqrt();
    let unimodular = [[e1[0] * stretch, e2[0] / stretch], [e1[1] * stretch, e2[1] / stretch]];
    let rho = (len[0] * len[1]).sqrt();
    let scale = section.level.sqrt() / rho;
    let mut map = NormalizationMap {
        unimodular,
        scale,
        center: e.center,
        level: section.level,
        ellipse: e,
        inner_radius: 0.0,
        outer_radius: 0.0,
        alpha_target: ALPHA_2,
        meets_alpha: false,
        inside_unit_ball: false,
    };
    let image: Vec<Vec2> = section.boundary.iter().map(|p| map.apply(*p)).collect();
    map.inner_radius = inner_radius(&image);
    map.outer_radius = image.iter().map(|p| linalg::norm(*p)).fold(0.0, f64::max);
    map.meets_alpha = map.inner_radius >= ALPHA_2;
    map.inside_unit_ball = map.outer_radius <= 1.0 + 1e-9;
    Ok(map)
}

pub fn rescale_potential<P: ConvexPotential>(pot: P, t: f64, unimodular: Mat2) -> Result<RescaledPotential<P>> {
    RescaledPotential::new(pot, t, unimodular)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingCheck {
    pub t: f64,
    pub points: usize,
    /// Relative deviations of det, `|F|`, `|G|` and `v` from their predicted
    /// rescaled values.
    pub det: f64,
    pub norm_f: f64,
    pub norm_g: f64,
    pub v: f64,
}

impl ScalingCheck {
    pub fn max_deviation(&self) -> f64 {
        self.det.max(self.norm_f).max(self.norm_g).max(self.v)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300).max(a.abs())
}

/// Compare the rescaled potential at `x` with the original at the image
/// point, for every `x` in `points` (rescaled coordinates).
pub fn scaling_check<P: ConvexPotential>(r: &RescaledPotential<P>, points: &[Vec2]) -> Result<ScalingCheck> {
    let s_inv = linalg::inverse(&r.unimodular).expect("unimodular");
    let rows: Vec<[f64; 4]> = points
        .par_iter()
        .map(|&x| {
            let y = r.forward(x);
            if r.inner.domain_margin(y) <= 0.0 {
                return Err(Error::OutsideDomain(y));
            }
            let a = point_state(&r.inner, y)?;
            let b = point_state(r, x)?;
            let ca = curvature_tensors(&a);
            let cb = curvature_tensors(&b);
            let v_pred = linalg::scale(r.t.sqrt(), linalg::mat_vec(&s_inv, a.v));
            let v_scale = linalg::norm(v_pred).max(linalg::norm(b.v)).max(1e-300);
            let dv = linalg::norm(linalg::sub(b.v, v_pred));
            let vdev = if v_scale <= 1e-300 { 0.0 } else { dv / v_scale.max(1e-12 * (1.0 + linalg::norm(a.v))) };
            let nf = if ca.norm_f2 == 0.0 && cb.norm_f2 == 0.0 { 0.0 } else { rel(cb.norm_f2.sqrt(), r.t * ca.norm_f2.sqrt()) };
            let ng = if ca.norm_g2 == 0.0 && cb.norm_g2 == 0.0 { 0.0 } else { rel(cb.norm_g2.sqrt(), r.t * ca.norm_g2.sqrt()) };
            Ok([rel(b.det_hess, a.det_hess), nf, ng, vdev])
        })
        .collect::<Result<_>>()?;
    let mx = |k: usize| rows.iter().map(|r| r[k]).fold(0.0, f64::max);
    Ok(ScalingCheck { t: r.t, points: points.len(), det: mx(0), norm_f: mx(1), norm_g: mx(2), v: mx(3) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub level: f64,
    pub volume: f64,
    pub volume_ratio: f64,
    /// Normalized distance from the half-level section to the boundary of
    /// the section.
    pub half_gap: f64,
    /// `max H_y(z) / t` over sampled `y, z` in the section.
    pub quasi_triangle: f64,
    /// Inner radius of the normalized half-level section about the centre.
    pub half_inner: f64,
    pub normalization: NormalizationMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionStats {
    pub center: Vec2,
    pub levels: Vec<LevelStats>,
    pub skipped: Vec<(f64, String)>,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
}

fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let e = linalg::sub(b, a);
    let s = (linalg::dot(linalg::sub(p, a), e) / linalg::dot(e, e)).clamp(0.0, 1.0);
    linalg::norm(linalg::sub(p, linalg::add(a, linalg::scale(s, e))))
}

fn level_stats<P: ConvexPotential + ?Sized>(pot: &P, x: Vec2, t: f64, rays: usize) -> Result<LevelStats> {
    let full = section_boundary(pot, x, t, rays)?;
    let half = section_boundary(pot, x, 0.5 * t, rays)?;
    let norm = normalize_section(&full)?;
    let outer: Vec<Vec2> = full.boundary.iter().map(|p| norm.apply(*p)).collect();
    let inner: Vec<Vec2> = half.boundary.iter().map(|p| norm.apply(*p)).collect();
    let n = outer.len();
    let half_gap = inner
        .iter()
        .map(|p| (0..n).map(|k| point_segment_distance(*p, outer[k], outer[(k + 1) % n])).fold(f64::INFINITY, f64::min))
        .fold(f64::INFINITY, f64::min);
    let centre = norm.apply(x);
    let shifted: Vec<Vec2> = inner.iter().map(|p| linalg::sub(*p, centre)).collect();
    let half_inner = inner_radius(&shifted);

    let stride = (rays / 16).max(1);
    let mut samples = vec![x];
    for k in (0..rays).step_by(stride) {
        let b = full.boundary[k];
        for f in [1.0 / 3.0, 2.0 / 3.0] {
            samples.push(linalg::lerp(x, b, f));
        }
        // a hair inside so every sample is a genuine member
        samples.push(linalg::lerp(x, b, 1.0 - 1e-9));
    }
    let jets: Vec<Jet4> = samples.par_iter().map(|p| pot.jet(*p)).collect::<Result<_>>()?;
    let quasi =
        jets.par_iter().map(|jy| jets.iter().map(|jz| h_from_jet(jy, jz.value, jz.location)).fold(0.0, f64::max)).reduce(|| 0.0, f64::max)
            / t;
    Ok(LevelStats {
        level: t,
        volume: full.volume,
        volume_ratio: full.volume / t,
        half_gap,
        quasi_triangle: quasi,
        half_inner,
        normalization: norm,
    })
}

pub fn section_stats<P: ConvexPotential + ?Sized>(pot: &P, x: Vec2, levels: &[f64], rays: usize) -> Result<SectionStats> {
    let mut out = Vec::new();
    let mut skipped = Vec::new();
    for &t in levels {
        match level_stats(pot, x, t, rays) {
            Ok(s) => out.push(s),
            Err(e @ Error::NonCompactSection { .. }) => skipped.push((t, e.to_string())),
            Err(e) => return Err(e),
        }
    }
    let fold = |f: fn(&LevelStats) -> f64, init: f64, op: fn(f64, f64) -> f64| out.iter().map(f).fold(init, op);
    Ok(SectionStats {
        center: x,
        c1: fold(|s| s.volume_ratio, f64::INFINITY, f64::min),
        c2: fold(|s| s.volume_ratio, 0.0, f64::max),
        c3: fold(|s| s.half_gap, f64::INFINITY, f64::min),
        c4: fold(|s| s.quasi_triangle, 0.0, f64::max),
        c5: fold(|s| s.half_inner, f64::INFINITY, f64::min),
        levels: out,
        skipped,
    })
}
