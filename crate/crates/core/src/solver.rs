//! Damped Gauss-Newton for `S(u) = A` over the polynomial correction, and the
//! variational functional `-int log det + int A u - int_boundary u dsigma`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bernstein::BernsteinPoly2;
use crate::calculus::{abreu_s_forms, hessian_package};
use crate::error::{Error, Result};
use crate::forcing::Forcing;
use crate::jet::Jet4;
use crate::linalg::{self, Vec2};
use crate::polytope::Polygon;
use crate::potential::{convexity_audit, normalize, ConvexPotential, GridSpec, SymplecticPotential};
use crate::quadrature::{graded_boundary_rule, graded_polygon_rule, Grading};
use crate::stability::{affine_kernel_check, KernelCheck};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub degree: usize,
    /// Collocation on the cell centres of an `grid x grid` box subdivision.
    pub grid: usize,
    /// Boundary clip for collocation; `None` means `1e-2 * diameter`.
    pub d_min: Option<f64>,
    pub tol_residual: f64,
    pub max_iter: usize,
    pub backtrack: f64,
    pub min_step: f64,
    /// Reject steps that lose convexity at a collocation point.
    pub convexity_safeguard: bool,
    /// Start from these correction coefficients instead of zero.
    pub initial_coefficients: Option<Vec<f64>>,
    /// Record the functional at every accepted iterate.
    pub track_functional: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            degree: crate::potential::DEFAULT_DEGREE,
            grid: 20,
            d_min: None,
            tol_residual: 1e-8,
            max_iter: 50,
            backtrack: 0.5,
            min_step: 1e-6,
            convexity_safeguard: true,
            initial_coefficients: None,
            track_functional: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub residual_rms: f64,
    pub residual_max: f64,
    pub step: f64,
    /// `-int log det + L(u)` on a coarse grading.
    pub energy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveMetadata {
    pub forcing: Forcing,
    pub residual_rms: f64,
    pub residual_max: f64,
    pub iterations: usize,
    pub functional_value: f64,
    pub energy_value: f64,
    /// `L(u)`; equals `2 Vol(polygon)` at a solution.
    pub linear_value: f64,
    pub converged: bool,
    pub collocation_points: usize,
    /// Largest gap between the divergence and log-det forms of `S` on the
    /// cross-check subset.
    pub form_crosscheck: f64,
    pub kernel: KernelCheck,
    pub history: Vec<IterationRecord>,
    /// `true` when the recorded energy never increased.
    pub energy_monotone: Option<bool>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    /// Normalized at the base point.
    pub potential: SymplecticPotential,
    pub meta: SolveMetadata,
}

/// `S(u)(x_p) - A(x_p)` with the divergence form of `S`.
pub fn residual_vector<P: ConvexPotential + ?Sized>(pot: &P, a: &Forcing, points: &[Vec2]) -> Result<Vec<f64>> {
    points
        .par_iter()
        .map(|&x| {
            let st = hessian_package(&pot.jet(x)?)?;
            Ok(st.s - a.eval(x)?)
        })
        .collect()
}

pub fn rms_and_max(r: &[f64]) -> (f64, f64) {
    if r.is_empty() {
        return (0.0, 0.0);
    }
    let ss: f64 = r.iter().map(|v| v * v).sum();
    ((ss / r.len() as f64).sqrt(), r.iter().fold(0.0_f64, |m, v| m.max(v.abs())))
}

/// Cached jets at the collocation points: the canonical part and each
/// Bernstein basis function. The correction enters linearly, so any trial
/// jet is a fixed combination of these.
struct Collocation {
    points: Vec<Vec2>,
    forcing: Vec<f64>,
    base: Vec<Jet4>,
    basis: Vec<Vec<Jet4>>,
}

impl Collocation {
    fn new(start: &SymplecticPotential, a: &Forcing, points: Vec<Vec2>) -> Result<Self> {
        let canonical = SymplecticPotential::canonical(start.polygon(), start.degree());
        let corr = start.correction().clone();
        let n = corr.num_coeffs();
        let base = points.par_iter().map(|&x| canonical.jet(x)).collect::<Result<Vec<_>>>()?;
        let basis = points.par_iter().map(|&x| (0..n).map(|k| corr.basis_jet(k, x)).collect()).collect();
        let forcing = points.iter().map(|&x| a.eval(x)).collect::<Result<_>>()?;
        Ok(Collocation { points, forcing, base, basis })
    }

    fn jet(&self, p: usize, coeffs: &[f64]) -> Jet4 {
        let mut j = self.base[p];
        for (c, b) in coeffs.iter().zip(&self.basis[p]) {
            if *c != 0.0 {
                j = j.plus(&b.scaled(*c));
            }
        }
        j
    }

    fn residuals(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        (0..self.points.len()).into_par_iter().map(|p| Ok(hessian_package(&self.jet(p, coeffs))?.s - self.forcing[p])).collect()
    }

    /// Forward differences, one column per coefficient.
    fn jacobian(&self, coeffs: &[f64], r0: &[f64]) -> Result<DMatrix<f64>> {
        let n = coeffs.len();
        let m = self.points.len();
        let cols: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|k| {
                let h = 1e-7 * coeffs[k].abs().max(1.0);
                (0..m)
                    .map(|p| {
                        let j = self.jet(p, coeffs).plus(&self.basis[p][k].scaled(h));
                        Ok((hessian_package(&j)?.s - self.forcing[p] - r0[p]) / h)
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        Ok(DMatrix::from_fn(m, n, |i, k| cols[k][i]))
    }

    fn min_eigenvalue(&self, coeffs: &[f64]) -> f64 {
        (0..self.points.len())
            .into_par_iter()
            .map(|p| linalg::min_eigenvalue(&self.jet(p, coeffs).hess))
            .collect::<Vec<f64>>()
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    fn form_gap(&self, coeffs: &[f64]) -> f64 {
        let stride = 100.min(self.points.len()).max(1);
        let mut gap: f64 = 0.0;
        for p in (0..self.points.len()).step_by(stride) {
            if let Ok(st) = hessian_package(&self.jet(p, coeffs)) {
                let f = abreu_s_forms(&st);
                gap = gap.max((f.divergence - f.log_det).abs());
            }
        }
        gap
    }
}

/// Subtract the affine Taylor part of the correction at `x0`; `S` does not
/// see it and removing it pins the otherwise free gauge.
fn remove_affine_part(corr: &BernsteinPoly2, x0: Vec2) -> Vec<f64> {
    let j = corr.jet(x0);
    let c = j.value - linalg::dot(j.grad, x0);
    let aff = BernsteinPoly2::from_monomials(corr.degree, corr.lo, corr.hi, &[(0, 0, c), (1, 0, j.grad[0]), (0, 1, j.grad[1])]);
    corr.coeffs.iter().zip(&aff.coeffs).map(|(a, b)| a - b).collect()
}

pub fn collocation_points(poly: &Polygon, config: &SolveConfig) -> Vec<Vec2> {
    let d_min = config.d_min.unwrap_or(1e-2 * poly.diameter());
    poly.interior_grid(config.grid, d_min)
}

/// Grading used for the functional history during a solve.
const HISTORY_GRADING: Grading = Grading { radial_levels: 20, angular_levels: 10, order: 5 };

pub fn solve(poly: &Polygon, a: &Forcing, config: &SolveConfig) -> Result<SolveResult> {
    let mut warnings = Vec::new();
    if !(config.tol_residual > 0.0) || !(config.min_step > 0.0) || !(config.backtrack > 0.0 && config.backtrack < 1.0) {
        return Err(Error::Input("tolerances must be positive and backtracking in (0, 1)".into()));
    }
    let kernel = affine_kernel_check(poly, a)?;
    if !kernel.passes {
        warnings.push(format!("forcing does not annihilate affine functions: residuals {:?}", kernel.residuals));
    }
    let start = SymplecticPotential::canonical(poly, config.degree);
    let n = start.correction().num_coeffs();
    let start = match &config.initial_coefficients {
        Some(c) => start.with_coefficients(c.clone())?,
        None => start,
    };
    let points = collocation_points(poly, config);
    if points.len() < n {
        return Err(Error::Input(format!("{} collocation points for {n} coefficients; increase the grid", points.len())));
    }
    let col = Collocation::new(&start, a, points)?;
    let x0 = poly.base_point();
    let mut corr = start.correction().clone();
    corr.coeffs = remove_affine_part(&corr, x0);
    if config.convexity_safeguard && col.min_eigenvalue(&corr.coeffs) <= 0.0 {
        return Err(Error::Barrier { iteration: 0 });
    }
    let functional_at = |coeffs: &[f64]| -> Result<f64> {
        let pot = normalize(&start.with_coefficients(coeffs.to_vec())?)?;
        Ok(functional_parts(&pot, a, HISTORY_GRADING)?.energy())
    };

    let mut r = col.residuals(&corr.coeffs)?;
    let (mut rms, mut rmax) = rms_and_max(&r);
    let mut history = vec![IterationRecord {
        iteration: 0,
        residual_rms: rms,
        residual_max: rmax,
        step: 0.0,
        energy: if config.track_functional { Some(functional_at(&corr.coeffs)?) } else { None },
    }];
    let mut iterations = 0;
    while rms >= config.tol_residual {
        if iterations >= config.max_iter {
            return Err(Error::Diverged { iterations, residual_rms: rms });
        }
        iterations += 1;
        let jac = col.jacobian(&corr.coeffs, &r)?;
        let jt = jac.transpose();
        let mut normal = &jt * &jac;
        let floor = 1e-12 * (0..n).map(|k| normal[(k, k)]).fold(0.0_f64, f64::max).max(1e-300);
        for k in 0..n {
            normal[(k, k)] += floor;
        }
        let rhs = -(&jt * DVector::from_column_slice(&r));
        let delta = match normal.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => normal.lu().solve(&rhs).ok_or_else(|| Error::Conditioning("singular normal equations".into()))?,
        };
        let mut alpha = 1.0;
        let mut lost_convexity = false;
        let accepted = loop {
            let trial: Vec<f64> = corr.coeffs.iter().zip(delta.iter()).map(|(c, d)| c + alpha * d).collect();
            let mut tp = corr.clone();
            tp.coeffs = trial;
            let trial = remove_affine_part(&tp, x0);
            let convex = !config.convexity_safeguard || col.min_eigenvalue(&trial) > 0.0;
            if convex {
                if let Ok(rt) = col.residuals(&trial) {
                    let (trms, tmax) = rms_and_max(&rt);
                    if trms < rms {
                        break Some((trial, rt, trms, tmax));
                    }
                }
            } else {
                lost_convexity = true;
            }
            alpha *= config.backtrack;
            if alpha < config.min_step {
                break None;
            }
        };
        let Some((trial, rt, trms, tmax)) = accepted else {
            if lost_convexity {
                return Err(Error::Barrier { iteration: iterations });
            }
            return Err(Error::Diverged { iterations, residual_rms: rms });
        };
        corr.coeffs = trial;
        r = rt;
        rms = trms;
        rmax = tmax;
        history.push(IterationRecord {
            iteration: iterations,
            residual_rms: rms,
            residual_max: rmax,
            step: alpha,
            energy: if config.track_functional { Some(functional_at(&corr.coeffs)?) } else { None },
        });
    }

    let potential = normalize(&start.with_coefficients(corr.coeffs.clone())?)?;
    let audit = convexity_audit(&potential, GridSpec::default());
    if !audit.is_convex() {
        return Err(Error::NotConvex { at: audit.argmin, min_eig: audit.min_eigenvalue });
    }
    let parts = functional_parts(&potential, a, Grading::default())?;
    let energy_monotone = config.track_functional.then(|| {
        let f: Vec<f64> = history.iter().filter_map(|h| h.energy).collect();
        // quadrature noise floor on a functional of size O(1)
        f.windows(2).all(|w| w[1] <= w[0] + 1e-9 * (1.0 + w[0].abs()))
    });
    if energy_monotone == Some(false) {
        warnings.push("energy increased along an accepted iterate".into());
    }
    Ok(SolveResult {
        meta: SolveMetadata {
            forcing: a.clone(),
            residual_rms: rms,
            residual_max: rmax,
            iterations,
            functional_value: parts.functional(),
            energy_value: parts.energy(),
            linear_value: parts.linear_part(),
            converged: true,
            collocation_points: col.points.len(),
            form_crosscheck: col.form_gap(&corr.coeffs),
            kernel,
            history,
            energy_monotone,
            warnings,
        },
        potential,
    })
}

/// The three integrals making up the variational functionals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalParts {
    /// `int log det(u_ij)`
    pub log_det: f64,
    /// `int A u`
    pub forcing_u: f64,
    /// `int_boundary u dsigma`
    pub boundary_u: f64,
}

impl FunctionalParts {
    /// `-int log det + int A u - int_boundary u dsigma`
    pub fn functional(&self) -> f64 {
        -self.log_det + self.forcing_u - self.boundary_u
    }

    /// `-int log det + L(u)`. Its first variation along `f` is
    /// `int (S(u) - A) f`, so solutions are its critical points.
    pub fn energy(&self) -> f64 {
        -self.log_det - self.forcing_u + self.boundary_u
    }

    /// `L(u) = int_boundary u dsigma - int A u`
    pub fn linear_part(&self) -> f64 {
        self.boundary_u - self.forcing_u
    }
}

/// `-int log det(u_ij) + int A u - int_boundary u dsigma` with the default grading.
pub fn functional_f(pot: &SymplecticPotential, a: &Forcing) -> Result<f64> {
    Ok(functional_parts(pot, a, Grading::default())?.functional())
}

pub fn functional_parts(pot: &SymplecticPotential, a: &Forcing, grading: Grading) -> Result<FunctionalParts> {
    let poly = pot.polygon();
    let area = graded_polygon_rule(poly, grading);
    let vals: Vec<(f64, f64)> = area
        .points
        .par_iter()
        .map(|&x| {
            let j = pot.jet(x)?;
            let det = linalg::det(&j.hess);
            if !(det > 0.0) {
                return Err(Error::NotConvex { at: x, min_eig: linalg::min_eigenvalue(&j.hess) });
            }
            Ok((det.ln(), a.eval(x)? * j.value))
        })
        .collect::<Result<_>>()?;
    let mut log_det = 0.0;
    let mut forcing_u = 0.0;
    for ((l, au), w) in vals.iter().zip(&area.weights) {
        log_det += w * l;
        forcing_u += w * au;
    }
    let boundary = graded_boundary_rule(poly, 2 * grading.radial_levels, grading.order);
    let boundary_u = boundary.integrate_par(|x| pot.value_on_closure(x))?;
    Ok(FunctionalParts { log_det, forcing_u, boundary_u })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{canonical_potential, QuadraticPotential};

    #[test]
    fn residuals_of_gold() {
        let u = canonical_potential(&Polygon::unit_square());
        let pts = Polygon::unit_square().interior_grid(7, 0.01);
        let r = residual_vector(&u, &Forcing::Constant(4.0), &pts).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-10));
        let r = residual_vector(&u, &Forcing::Constant(5.0), &pts).unwrap();
        assert!(r.iter().all(|v| (v + 1.0).abs() < 1e-10));
        let q = QuadraticPotential::standard();
        let r = residual_vector(&q, &Forcing::Constant(0.0), &[[0.3, 0.1], [5.0, -2.0]]).unwrap();
        assert_eq!(r, vec![0.0, 0.0]);
    }

    #[test]
    fn functional_of_square_gold() {
        let u = normalize(&canonical_potential(&Polygon::unit_square())).unwrap();
        let f = functional_f(&u, &Forcing::Constant(4.0)).unwrap();
        assert!((f + 6.0).abs() < 1e-8, "{f}");
        let p = functional_parts(&u, &Forcing::Constant(4.0), Grading::default()).unwrap();
        assert!((p.log_det - 4.0).abs() < 1e-8);
        assert!((p.forcing_u - 4.0 * (-1.0 + 2.0 * 2f64.ln())).abs() < 1e-10);
        assert!((p.boundary_u - (-2.0 + 8.0 * 2f64.ln())).abs() < 1e-10);
        assert!((p.linear_part() - 2.0).abs() < 1e-10);
        assert!((p.energy() + 2.0).abs() < 1e-8);
    }

    #[test]
    fn gauge_removal_kills_affine_part() {
        let sq = Polygon::unit_square();
        let p = BernsteinPoly2::from_monomials(6, [0.0, 0.0], [1.0, 1.0], &[(0, 0, 2.0), (1, 0, -1.0), (0, 1, 3.0), (2, 2, 0.5)]);
        let mut q = p.clone();
        q.coeffs = remove_affine_part(&p, sq.base_point());
        let j = q.jet(sq.base_point());
        assert!(j.value.abs() < 1e-14 && j.grad[0].abs() < 1e-14 && j.grad[1].abs() < 1e-14);
        assert!((j.d4(0, 0, 1, 1) - 2.0).abs() < 1e-10);
    }

    #[test]
    fn solve_from_gold_is_immediate() {
        let sq = Polygon::unit_square();
        let cfg = SolveConfig { grid: 12, track_functional: false, ..Default::default() };
        let res = solve(&sq, &Forcing::Constant(4.0), &cfg).unwrap();
        assert_eq!(res.meta.iterations, 0);
        assert!((res.meta.functional_value + 6.0).abs() < 1e-8);
    }

    #[test]
    fn too_few_points_rejected() {
        let cfg = SolveConfig { grid: 3, ..Default::default() };
        assert!(matches!(solve(&Polygon::unit_square(), &Forcing::Constant(4.0), &cfg), Err(Error::Input(_))));
    }
}
