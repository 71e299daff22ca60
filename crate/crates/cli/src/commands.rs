use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use rayon::prelude::*;
use serde::Serialize;

use abreu_core::calculus::{field_row, FIELD_COLUMNS};
use abreu_core::conjugate::{boundary_compare, hamiltonian, three_point_k, v_bound_check, Conjugate, HamiltonianConfig};
use abreu_core::estimates::{chi_invariant, verify, CheckRecord, ChiReport, VerifyConfig};
use abreu_core::forcing::Forcing;
use abreu_core::io::{format_sig12, load_polygon, SolutionFile};
use abreu_core::polytope::{boundary_b, measures_and_a};
use abreu_core::quadrature::Grading;
use abreu_core::sections::{normalize_section, section_boundary, section_stats, NormalizationMap, SectionStats};
use abreu_core::solver::{solve, SolveConfig};
use abreu_core::stability::{affine_kernel_check, lambda_lower_bound, CreaseEval, CreaseSweep};
use abreu_core::{Error, Polygon, SymplecticPotential, Vec2};

use crate::output::{csv_bytes, emit_json, print_data, short, write_atomic};
use crate::{Command, Failure, SolveArgs};

pub fn dispatch(command: Command) -> Result<String, Failure> {
    match command {
        Command::Check { polygon, forcing } => check(&polygon, forcing.as_deref()),
        Command::Solve(args) => run_solve(args),
        Command::Verify { solution, checks, report } => run_verify(&solution, checks, report.as_deref()),
        Command::Chi { solutions, report } => chi(&solutions, report.as_deref()),
        Command::Lambda { polygon, forcing, directions, offsets, report } => {
            lambda(&polygon, forcing.as_deref(), CreaseSweep { directions, offsets }, report.as_deref())
        }
        Command::Conjugate { solution, grid, origin, csv, report } => conjugate(&solution, grid, origin, csv.as_deref(), report.as_deref()),
        Command::Sections { solution, point, levels, rays, report, polylines } => {
            sections(&solution, point, &levels, rays, report.as_deref(), polylines.as_deref())
        }
        Command::Grid { solution, n, d_min, out } => grid(&solution, n, d_min, out.as_deref()),
    }
}

fn read_polygon(path: &Path) -> anyhow::Result<Polygon> {
    load_polygon(path).with_context(|| format!("reading polygon {}", path.display()))
}

fn read_solution(path: &Path) -> anyhow::Result<(SolutionFile, SymplecticPotential)> {
    let file = SolutionFile::load(path).with_context(|| format!("reading solution {}", path.display()))?;
    let pot = file.potential().with_context(|| format!("rebuilding potential from {}", path.display()))?;
    Ok((file, pot))
}

/// The forcing given on the command line, or the constant fixed by the
/// boundary measure.
fn forcing_for(poly: &Polygon, text: Option<&str>) -> anyhow::Result<Forcing> {
    Ok(match text {
        Some(t) => Forcing::parse(t)?,
        None => Forcing::constant(measures_and_a(poly).a_const)?,
    })
}

fn check(path: &Path, forcing: Option<&str>) -> Result<String, Failure> {
    let poly = read_polygon(path)?;
    let m = measures_and_a(&poly);
    let mut line = format!("A = {} (area {}, boundary measure {})", short(m.a_const), short(m.area), short(m.boundary_volume));
    if let Some(text) = forcing {
        let a = Forcing::parse(text)?;
        let k = affine_kernel_check(&poly, &a)?;
        if !k.passes {
            return Err(Failure::Input(anyhow!(
                "forcing {} does not annihilate affine functions: residuals {:?}",
                a.describe(),
                k.residuals
            )));
        }
        line.push_str(&format!("; forcing {} passes the affine kernel check", a.describe()));
    }
    Ok(line)
}

fn run_solve(args: SolveArgs) -> Result<String, Failure> {
    let poly = read_polygon(&args.polygon)?;
    let a = forcing_for(&poly, args.forcing.as_deref())?;
    let mut cfg = SolveConfig::default();
    if let Some(d) = args.degree {
        if d == 0 {
            return Err(Failure::Input(anyhow!("degree must be at least 1")));
        }
        cfg.degree = d;
    }
    if let Some(g) = args.grid {
        cfg.grid = g;
    }
    if let Some(t) = args.tol {
        cfg.tol_residual = t;
    }
    if let Some(k) = args.max_iter {
        cfg.max_iter = k;
    }
    let result = solve(&poly, &a, &cfg).map_err(|e| match e {
        Error::Diverged { .. } | Error::Barrier { .. } | Error::NotConvex { .. } => Failure::Solver(e.into()),
        e => Failure::Input(e.into()),
    })?;
    let file = SolutionFile::from_result(&result);
    write_atomic(&args.out, file.to_json()?.as_bytes())?;
    let m = &result.meta;
    Ok(format!(
        "converged in {} iterations: rms residual {}, max residual {}, wrote {}",
        m.iterations,
        short(m.residual_rms),
        short(m.residual_max),
        args.out.display()
    ))
}

#[derive(Serialize)]
struct VerifyOutput<'a> {
    passed: bool,
    forcing: &'a Forcing,
    checks: &'a [CheckRecord],
}

fn run_verify(path: &Path, checks: Option<Vec<String>>, report: Option<&Path>) -> Result<String, Failure> {
    let (file, pot) = read_solution(path)?;
    let cfg = VerifyConfig { only: checks, ..Default::default() };
    let r = verify(&pot, &file.forcing, &cfg)?;
    let passed = r.all_passed();
    let out = VerifyOutput { passed, forcing: &file.forcing, checks: &r.checks };
    if let Some(p) = report {
        emit_json(&out, Some(p))?;
    }
    let failed: Vec<&str> = r.failures().iter().map(|c| c.id.as_str()).collect();
    if !passed {
        return Err(Failure::Verification(failed.join(", ")));
    }
    Ok(format!("{} checks passed", r.checks.len()))
}

fn chi(paths: &[PathBuf], report: Option<&Path>) -> Result<String, Failure> {
    let loaded = paths.iter().map(|p| read_solution(p)).collect::<anyhow::Result<Vec<_>>>()?;
    let poly = loaded[0].1.polygon().clone();
    if let Some((i, _)) = loaded.iter().enumerate().find(|(_, (_, p))| p.polygon() != &poly) {
        return Err(Failure::Input(anyhow!("{} has a different polygon from {}", paths[i].display(), paths[0].display())));
    }
    let pots: Vec<&SymplecticPotential> = loaded.iter().map(|(_, p)| p).collect();
    let r: ChiReport = chi_invariant(&poly, &pots, Grading::default())?;
    emit_json(&r, report)?;
    let vals: Vec<String> = r.values.iter().map(|v| short(*v)).collect();
    Ok(format!("chi = [{}], spread {}, quadrature error {}", vals.join(", "), short(r.spread), short(r.quadrature_error)))
}

#[derive(Serialize)]
struct LambdaOutput {
    lambda_lb: Option<f64>,
    destabilizer: Option<CreaseEval>,
    kernel_residuals: [f64; 3],
    kernel_passes: bool,
    argmax: Option<CreaseEval>,
    evaluated: usize,
    skipped: usize,
    notes: Vec<String>,
}

fn lambda(path: &Path, forcing: Option<&str>, sweep: CreaseSweep, report: Option<&Path>) -> Result<String, Failure> {
    let poly = read_polygon(path)?;
    let a = forcing_for(&poly, forcing)?;
    let r = lambda_lower_bound(&poly, &a, sweep)?;
    let out = LambdaOutput {
        lambda_lb: r.lambda_lb,
        destabilizer: r.destabilizer,
        kernel_residuals: r.kernel.residuals,
        kernel_passes: r.kernel.passes,
        argmax: r.argmax,
        evaluated: r.evaluated,
        skipped: r.skipped,
        notes: r.notes,
    };
    emit_json(&out, report)?;
    Ok(format!(
        "lambda >= {} over {} creases{}",
        out.lambda_lb.map_or("none".into(), short),
        out.evaluated,
        if out.destabilizer.is_some() { "; destabilizing crease found" } else { "" }
    ))
}

#[derive(Serialize)]
struct ConjugateOutput {
    #[serde(rename = "K")]
    k: f64,
    sup_grad_h: f64,
    sup_w: f64,
    sup_v: f64,
    qh_residual: f64,
    boundary_deviation: f64,
    loop_closure: f64,
    rectangles: usize,
    origin: Vec2,
    a: f64,
    points: usize,
    vertex_values: Vec<f64>,
}

fn conjugate(path: &Path, n: usize, origin: Option<Vec2>, csv: Option<&Path>, report: Option<&Path>) -> Result<String, Failure> {
    let (file, pot) = read_solution(path)?;
    if n == 0 {
        return Err(Failure::Input(anyhow!("grid size must be positive")));
    }
    let a = file
        .forcing
        .as_constant()
        .ok_or_else(|| anyhow!("the conjugate function needs a constant forcing, found {}", file.forcing.describe()))?;
    let poly = pot.polygon();
    let origin = origin.unwrap_or(poly.base_point());
    let points = poly.interior_grid(n, 1e-3 * poly.diameter());
    let field = hamiltonian(&pot, poly, a, origin, &points, HamiltonianConfig::default())?;
    let b = boundary_b(poly, a, origin)?;
    let k = three_point_k(&b);
    let conj = Conjugate::new(&pot, a, origin, poly.base_point());
    let cmp = boundary_compare(&conj, poly, &b)?;
    let vb = v_bound_check(&pot, poly, a, origin, k, &points)?;
    if let Some(p) = csv {
        let rows = (0..points.len())
            .map(|i| [points[i][0], points[i][1], field.values[i], field.w[i][0], field.w[i][1]].map(format_sig12).to_vec());
        write_atomic(p, &csv_bytes(&["x", "y", "H", "w1", "w2"], rows)?)?;
    }
    let out = ConjugateOutput {
        k,
        sup_grad_h: field.sup_grad_h,
        sup_w: vb.sup_w,
        sup_v: vb.sup_v,
        qh_residual: field.q_residual,
        boundary_deviation: cmp.deviation,
        loop_closure: field.loop_closure,
        rectangles: field.rectangles,
        origin,
        a,
        points: points.len(),
        vertex_values: b.vertices.iter().enumerate().map(|(i, _)| b.vertex_value(i)).collect(),
    };
    emit_json(&out, report)?;
    Ok(format!("K = {}, sup|grad H| = {}, boundary deviation {}", short(out.k), short(out.sup_grad_h), short(out.boundary_deviation)))
}

#[derive(Serialize)]
struct SectionRecord {
    level: f64,
    volume: Option<f64>,
    shoelace_area: Option<f64>,
    convex: Option<bool>,
    margin: Option<f64>,
    normalization: Option<NormalizationMap>,
    error: Option<String>,
}

#[derive(Serialize)]
struct SectionsOutput {
    point: Vec2,
    rays: usize,
    sections: Vec<SectionRecord>,
    stats: SectionStats,
}

fn sections(
    path: &Path,
    point: Vec2,
    levels: &[f64],
    rays: usize,
    report: Option<&Path>,
    polylines: Option<&Path>,
) -> Result<String, Failure> {
    let (_, pot) = read_solution(path)?;
    if !pot.polygon().contains(point) {
        return Err(Failure::Input(anyhow!("point ({}, {}) is not inside the polygon", point[0], point[1])));
    }
    let mut records = Vec::new();
    let mut lines = Vec::new();
    for &t in levels {
        match section_boundary(&pot, point, t, rays) {
            Ok(s) => {
                for (k, p) in s.boundary.iter().enumerate() {
                    lines.push(vec![format_sig12(t), k.to_string(), format_sig12(p[0]), format_sig12(p[1])]);
                }
                records.push(SectionRecord {
                    level: t,
                    volume: Some(s.volume),
                    shoelace_area: Some(s.shoelace_area()),
                    convex: Some(s.is_convex()),
                    margin: Some(s.margin),
                    normalization: Some(normalize_section(&s)?),
                    error: None,
                });
            }
            Err(e @ Error::NonCompactSection { .. }) => records.push(SectionRecord {
                level: t,
                volume: None,
                shoelace_area: None,
                convex: None,
                margin: None,
                normalization: None,
                error: Some(e.to_string()),
            }),
            Err(e) => return Err(e.into()),
        }
    }
    let stats = section_stats(&pot, point, levels, rays)?;
    if let Some(p) = polylines {
        write_atomic(p, &csv_bytes(&["level", "ray", "x", "y"], lines)?)?;
    }
    let computed = records.iter().filter(|r| r.error.is_none()).count();
    emit_json(&SectionsOutput { point, rays, sections: records, stats }, report)?;
    Ok(format!("{computed} of {} sections computed", levels.len()))
}

fn grid(path: &Path, n: usize, d_min: Option<f64>, out: Option<&Path>) -> Result<String, Failure> {
    let (_, pot) = read_solution(path)?;
    if n == 0 {
        return Err(Failure::Input(anyhow!("grid size must be positive")));
    }
    let poly = pot.polygon();
    let d_min = d_min.unwrap_or(1e-3 * poly.diameter());
    if d_min.is_nan() || d_min <= 0.0 {
        return Err(Failure::Input(anyhow!("boundary clip must be positive")));
    }
    let points = poly.interior_grid(n, d_min);
    let rows: Vec<[f64; 16]> = points.par_iter().map(|x| field_row(&pot, *x)).collect::<abreu_core::Result<_>>()?;
    let bytes = csv_bytes(&FIELD_COLUMNS, rows.iter().map(|r| r.map(format_sig12).to_vec()))?;
    match out {
        Some(p) => {
            write_atomic(p, &bytes)?;
            Ok(format!("{} rows written to {}", rows.len(), p.display()))
        }
        None => {
            print_data(&String::from_utf8(bytes).map_err(|e| anyhow!("{e}"))?);
            Ok(format!("{} rows", rows.len()))
        }
    }
}
