//! The linear functional `L(f) = int_boundary f dsigma - int f A`, its affine
//! kernel, and lower bounds for the stability constant over single-crease
//! piecewise-linear test functions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forcing::Forcing;
use crate::linalg::{self, Vec2};
use crate::polytope::{defining_functions, measures_and_a, Polygon};
use crate::quadrature::{fan_rule, graded_boundary_rule, graded_polygon_rule, Grading};

/// Gauss order for area integrals of `f A` on clipped pieces when `A` is not
/// constant.
const CLIP_ORDER: usize = 12;

/// `f(x) = max(0, a . x + c)`, vanishing near the base point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CreasedPL {
    pub direction: Vec2,
    pub offset: f64,
}

impl CreasedPL {
    pub fn new(poly: &Polygon, direction: Vec2, offset: f64) -> Result<Self> {
        if linalg::norm(direction) == 0.0 || !direction.iter().all(|v| v.is_finite()) {
            return Err(Error::Input("crease direction must be non-zero".into()));
        }
        let at_base = linalg::dot(direction, poly.base_point()) + offset;
        if at_base >= 0.0 {
            return Err(Error::Input(format!("crease must vanish near the base point (a.x0 + c = {at_base:e} >= 0)")));
        }
        Ok(CreasedPL { direction, offset })
    }

    pub fn affine_part(&self, x: Vec2) -> f64 {
        linalg::dot(self.direction, x) + self.offset
    }

    pub fn eval(&self, x: Vec2) -> f64 {
        self.affine_part(x).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinfuncValue {
    /// `int_boundary f dsigma`
    pub boundary: f64,
    /// `int f A`
    pub area: f64,
    pub value: f64,
}

/// Part of the polygon where `a . x + c >= 0`.
pub fn clip_half_plane(vertices: &[Vec2], a: Vec2, c: f64) -> Vec<Vec2> {
    let n = vertices.len();
    let mut out = Vec::with_capacity(n + 2);
    for k in 0..n {
        let p = vertices[k];
        let q = vertices[(k + 1) % n];
        let fp = linalg::dot(a, p) + c;
        let fq = linalg::dot(a, q) + c;
        if fp >= 0.0 {
            out.push(p);
        }
        if (fp >= 0.0) != (fq >= 0.0) {
            let t = fp / (fp - fq);
            out.push(linalg::lerp(p, q, t));
        }
    }
    out
}

fn shoelace(vertices: &[Vec2]) -> (f64, Vec2) {
    let n = vertices.len();
    let mut a2 = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    for k in 0..n {
        let p = vertices[k];
        let q = vertices[(k + 1) % n];
        let cr = linalg::cross(p, q);
        a2 += cr;
        cx += (p[0] + q[0]) * cr;
        cy += (p[1] + q[1]) * cr;
    }
    if a2 == 0.0 {
        return (0.0, [0.0, 0.0]);
    }
    (0.5 * a2, [cx / (3.0 * a2), cy / (3.0 * a2)])
}

/// `L(f)` for a creased function, integrating exactly on the clipped polygon.
pub fn linfunc_creased(poly: &Polygon, a: &Forcing, f: &CreasedPL) -> Result<LinfuncValue> {
    let mut boundary = 0.0;
    for fr in defining_functions(poly) {
        let g0 = f.affine_part(fr.start);
        let g1 = f.affine_part(fr.end);
        let pos = if g0 >= 0.0 && g1 >= 0.0 {
            0.5 * (g0 + g1)
        } else if g0 <= 0.0 && g1 <= 0.0 {
            0.0
        } else {
            let g = g0.max(g1);
            0.5 * g * g / (g1 - g0).abs()
        };
        boundary += fr.sigma * fr.length * pos;
    }
    let piece = clip_half_plane(poly.vertices(), f.direction, f.offset);
    let area = if piece.len() < 3 {
        0.0
    } else if let Some(av) = a.as_constant() {
        let (ar, centroid) = shoelace(&piece);
        av * ar * f.affine_part(centroid)
    } else {
        let rule = fan_rule(&piece, CLIP_ORDER);
        let mut acc = 0.0;
        for (x, w) in rule.points.iter().zip(&rule.weights) {
            acc += w * f.affine_part(*x) * a.eval(*x)?;
        }
        acc
    };
    Ok(LinfuncValue { boundary, area, value: boundary - area })
}

/// `L(f)` for a creased function by Gauss quadrature on the pieces cut out by
/// the crease line, without the closed forms of [`linfunc_creased`].
pub fn linfunc_creased_quadrature(poly: &Polygon, a: &Forcing, f: &CreasedPL) -> Result<LinfuncValue> {
    let (z, w) = crate::quadrature::gauss_legendre(CLIP_ORDER);
    let mut boundary = 0.0;
    for fr in defining_functions(poly) {
        let g0 = f.affine_part(fr.start);
        let g1 = f.affine_part(fr.end);
        if g0 <= 0.0 && g1 <= 0.0 {
            continue;
        }
        let cut = linalg::lerp(fr.start, fr.end, g0 / (g0 - g1));
        let (p, q) = match (g0 >= 0.0, g1 >= 0.0) {
            (true, true) => (fr.start, fr.end),
            (true, false) => (fr.start, cut),
            _ => (cut, fr.end),
        };
        let len = linalg::norm(linalg::sub(q, p));
        for (zi, wi) in z.iter().zip(&w) {
            boundary += fr.sigma * 0.5 * len * wi * f.eval(linalg::lerp(p, q, 0.5 * (zi + 1.0)));
        }
    }
    let piece = clip_half_plane(poly.vertices(), f.direction, f.offset);
    let mut area = 0.0;
    if piece.len() >= 3 {
        let rule = fan_rule(&piece, CLIP_ORDER);
        for (x, w) in rule.points.iter().zip(&rule.weights) {
            area += w * f.eval(*x) * a.eval(*x)?;
        }
    }
    Ok(LinfuncValue { boundary, area, value: boundary - area })
}

/// Boundary-graded quadrature rules reused across evaluations of `L`.
#[derive(Debug, Clone)]
pub struct LinfuncRules {
    area: crate::quadrature::QuadRule,
    area_forcing: Vec<f64>,
    boundary: crate::quadrature::QuadRule,
}

impl LinfuncRules {
    pub fn new(poly: &Polygon, a: &Forcing, grading: Grading) -> Result<Self> {
        let area = graded_polygon_rule(poly, grading);
        let area_forcing = area.points.iter().map(|x| a.eval(*x)).collect::<Result<_>>()?;
        let boundary = graded_boundary_rule(poly, 2 * grading.radial_levels, grading.order);
        Ok(LinfuncRules { area, area_forcing, boundary })
    }

    /// `f` must be defined on the closed polygon.
    pub fn eval(&self, f: impl Fn(Vec2) -> Result<f64> + Sync) -> Result<LinfuncValue> {
        let boundary = self.boundary.integrate_par(&f)?;
        let vals: Vec<f64> = self.area.points.par_iter().map(|x| f(*x)).collect::<Result<_>>()?;
        let mut area = 0.0;
        for ((v, w), av) in vals.iter().zip(&self.area.weights).zip(&self.area_forcing) {
            area += v * w * av;
        }
        Ok(LinfuncValue { boundary, area, value: boundary - area })
    }
}

/// `L(f)` by graded quadrature for general `f`.
pub fn linfunc(poly: &Polygon, a: &Forcing, f: impl Fn(Vec2) -> Result<f64> + Sync) -> Result<LinfuncValue> {
    LinfuncRules::new(poly, a, Grading::default())?.eval(f)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelCheck {
    /// `L(1), L(x), L(y)`
    pub residuals: [f64; 3],
    pub tolerance: f64,
    pub passes: bool,
}

pub fn affine_kernel_check(poly: &Polygon, a: &Forcing) -> Result<KernelCheck> {
    let mut bnd = [0.0; 3];
    for fr in defining_functions(poly) {
        let mid = linalg::lerp(fr.start, fr.end, 0.5);
        let w = fr.sigma * fr.length;
        bnd[0] += w;
        bnd[1] += w * mid[0];
        bnd[2] += w * mid[1];
    }
    let mut area = [0.0; 3];
    if let Some(av) = a.as_constant() {
        let (ar, c) = shoelace(poly.vertices());
        area = [av * ar, av * ar * c[0], av * ar * c[1]];
    } else {
        let rule = fan_rule(poly.vertices(), CLIP_ORDER);
        for (x, w) in rule.points.iter().zip(&rule.weights) {
            let av = a.eval(*x)?;
            area[0] += w * av;
            area[1] += w * av * x[0];
            area[2] += w * av * x[1];
        }
    }
    let residuals = [bnd[0] - area[0], bnd[1] - area[1], bnd[2] - area[2]];
    let tolerance = 1e-10 * measures_and_a(poly).boundary_volume;
    let passes = residuals.iter().all(|r| r.abs() < tolerance);
    Ok(KernelCheck { residuals, tolerance, passes })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CreaseSweep {
    pub directions: usize,
    pub offsets: usize,
}

impl Default for CreaseSweep {
    fn default() -> Self {
        CreaseSweep { directions: 180, offsets: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CreaseEval {
    pub direction_index: usize,
    pub offset_index: usize,
    pub crease: CreasedPL,
    pub linfunc: LinfuncValue,
}

impl CreaseEval {
    pub fn ratio(&self) -> Option<f64> {
        (self.linfunc.value > 0.0).then(|| self.linfunc.boundary / self.linfunc.value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaReport {
    /// Largest `int_boundary f / L(f)` seen; `None` when no crease had `L > 0`.
    pub lambda_lb: Option<f64>,
    pub argmax: Option<CreaseEval>,
    /// First crease (in sweep order) with `L(f) <= 0` and positive boundary mass.
    pub destabilizer: Option<CreaseEval>,
    pub evaluated: usize,
    /// Offsets through the base point, which violate the normalisation.
    pub skipped: usize,
    pub kernel: KernelCheck,
    pub notes: Vec<String>,
}

/// Direction `i` makes angle `2 pi i / D`; offset `j` (1 <= j < K) puts the
/// crease a fraction `j / K` of the way from the base point to the farthest
/// vertex along that direction. Doubling `D` or `K` refines the family.
pub fn crease_family(poly: &Polygon, sweep: CreaseSweep) -> Vec<(usize, usize, CreasedPL)> {
    let x0 = poly.base_point();
    let mut out = Vec::new();
    for i in 0..sweep.directions {
        let t = std::f64::consts::TAU * i as f64 / sweep.directions as f64;
        let a = [t.cos(), t.sin()];
        let lo = linalg::dot(a, x0);
        let hi = poly.vertices().iter().map(|v| linalg::dot(a, *v)).fold(f64::NEG_INFINITY, f64::max);
        for j in 1..sweep.offsets {
            let level = lo + (hi - lo) * j as f64 / sweep.offsets as f64;
            out.push((i, j, CreasedPL { direction: a, offset: -level }));
        }
    }
    out
}

pub fn lambda_lower_bound(poly: &Polygon, a: &Forcing, sweep: CreaseSweep) -> Result<LambdaReport> {
    let kernel = affine_kernel_check(poly, a)?;
    let mut notes = Vec::new();
    if !kernel.passes {
        notes.push(format!("forcing does not annihilate affine functions (residuals {:?}); creases are still evaluated", kernel.residuals));
    }
    if sweep.directions == 0 || sweep.offsets < 2 {
        return Err(Error::Input("sweep needs at least one direction and two offsets".into()));
    }
    let family = crease_family(poly, sweep);
    let evals: Vec<CreaseEval> = family
        .par_iter()
        .map(|&(i, j, crease)| {
            linfunc_creased(poly, a, &crease).map(|linfunc| CreaseEval { direction_index: i, offset_index: j, crease, linfunc })
        })
        .collect::<Result<_>>()?;
    let mut best: Option<CreaseEval> = None;
    let mut destabilizer = None;
    for e in &evals {
        if e.linfunc.boundary <= 0.0 {
            continue;
        }
        match e.ratio() {
            Some(r) => {
                if best.is_none_or(|b| r > b.ratio().unwrap_or(f64::NEG_INFINITY)) {
                    best = Some(*e);
                }
            }
            None => {
                if destabilizer.is_none() {
                    destabilizer = Some(*e);
                }
            }
        }
    }
    notes.push(format!("{} offsets through the base point skipped (normalisation requires f = 0 there)", sweep.directions));
    Ok(LambdaReport {
        lambda_lb: best.and_then(|b| b.ratio()),
        argmax: best,
        destabilizer,
        evaluated: evals.len(),
        skipped: sweep.directions,
        kernel,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four() -> Forcing {
        Forcing::Constant(4.0)
    }

    #[test]
    fn square_quarter_crease() {
        let sq = Polygon::unit_square();
        let f = CreasedPL::new(&sq, [1.0, 0.0], -0.75).unwrap();
        let v = linfunc_creased(&sq, &four(), &f).unwrap();
        assert!((v.boundary - 5.0 / 16.0).abs() < 1e-15);
        assert!((v.value - 3.0 / 16.0).abs() < 1e-15);
        assert!((v.boundary / v.value - 5.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn crease_through_base_point_rejected() {
        let sq = Polygon::unit_square();
        assert!(CreasedPL::new(&sq, [1.0, 0.0], -0.5).is_err());
        assert!(CreasedPL::new(&sq, [0.0, 0.0], -0.75).is_err());
    }

    #[test]
    fn closed_form_ratio_along_axis() {
        let sq = Polygon::unit_square();
        for s in [0.01, 0.1, 0.25, 0.4, 0.49] {
            let f = CreasedPL::new(&sq, [1.0, 0.0], -(1.0 - s)).unwrap();
            let v = linfunc_creased(&sq, &four(), &f).unwrap();
            assert!((v.boundary - (s + s * s)).abs() < 1e-14);
            assert!((v.value - (s - s * s)).abs() < 1e-14);
        }
    }

    #[test]
    fn kernel_checks() {
        let k = affine_kernel_check(&Polygon::unit_square(), &four()).unwrap();
        assert!(k.passes && k.residuals.iter().all(|r| r.abs() < 1e-15));
        let k = affine_kernel_check(&Polygon::unit_square(), &Forcing::Constant(5.0)).unwrap();
        assert!(!k.passes);
        assert!((k.residuals[0] + 1.0).abs() < 1e-15);
        let k = affine_kernel_check(&Polygon::standard_simplex(), &Forcing::Constant(6.0)).unwrap();
        assert!(k.passes, "{k:?}");
        let sym = Forcing::parse("4 + 0.1*(x-0.5)*(y-0.5)").unwrap();
        assert!(affine_kernel_check(&Polygon::unit_square(), &sym).unwrap().passes);
    }

    #[test]
    fn quadrature_matches_clipping() {
        let sq = Polygon::unit_square();
        let f = CreasedPL::new(&sq, [0.6, 0.8], -0.9).unwrap();
        let exact = linfunc_creased(&sq, &four(), &f).unwrap();
        let q = linfunc(&sq, &four(), |x| Ok(f.eval(x))).unwrap();
        // the kink is not aligned with the graded cells
        assert!((exact.value - q.value).abs() < 1e-3, "{exact:?} {q:?}");
        let split = linfunc_creased_quadrature(&sq, &four(), &f).unwrap();
        assert!((exact.value - split.value).abs() < 1e-14);
        assert!((exact.boundary - split.boundary).abs() < 1e-14);
        let g = CreasedPL::new(&sq, [1.0, 0.0], -0.75).unwrap();
        let a = Forcing::parse("4 + x*y").unwrap();
        let e2 = linfunc_creased(&sq, &a, &g).unwrap();
        // int_{3/4}^1 int_0^1 (x - 3/4)(4 + x y) dy dx
        let area = 4.0 / 32.0 + 0.5 * (1.0 / 3.0 - 0.75 / 2.0 - (0.421875 / 3.0 - 0.75 * 0.5625 / 2.0));
        assert!((e2.area - area).abs() < 1e-14, "{} {}", e2.area, area);
    }

    #[test]
    fn sweep_on_square() {
        let r = lambda_lower_bound(&Polygon::unit_square(), &four(), CreaseSweep::default()).unwrap();
        assert!(r.destabilizer.is_none());
        assert!(r.lambda_lb.unwrap() >= 5.0 / 3.0);
        let small = lambda_lower_bound(&Polygon::unit_square(), &four(), CreaseSweep { directions: 8, offsets: 4 }).unwrap();
        assert!(small.lambda_lb.unwrap() <= r.lambda_lb.unwrap());
    }

    #[test]
    fn wrong_constant_destabilizes() {
        let r = lambda_lower_bound(&Polygon::unit_square(), &Forcing::Constant(12.0), CreaseSweep { directions: 8, offsets: 8 }).unwrap();
        assert!(!r.kernel.passes);
        assert!(r.destabilizer.is_some());
    }
}
