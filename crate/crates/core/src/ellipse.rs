//! Minimum-area enclosing ellipse of a planar point set.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat2, Vec2};

/// `{ x : (x - center)^T shape (x - center) <= 1 }`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center: Vec2,
    pub shape: Mat2,
}

impl Ellipse {
    pub fn area(&self) -> f64 {
        std::f64::consts::PI / linalg::det(&self.shape).sqrt()
    }

    pub fn level(&self, x: Vec2) -> f64 {
        let d = linalg::sub(x, self.center);
        linalg::dot(d, linalg::mat_vec(&self.shape, d))
    }

    /// Semi-axis lengths (major first) and matching unit directions.
    pub fn axes(&self) -> ([f64; 2], [Vec2; 2]) {
        let (vals, vecs) = linalg::sym_eigen(&self.shape);
        // smallest eigenvalue of the shape matrix is the major axis
        let dir = |k: usize| [vecs[0][k], vecs[1][k]];
        ([1.0 / vals[0].sqrt(), 1.0 / vals[1].sqrt()], [dir(0), dir(1)])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseFit {
    pub ellipse: Ellipse,
    pub iterations: usize,
    /// Final duality gap of the Khachiyan iteration.
    pub gap: f64,
}

/// Khachiyan's algorithm with Todd-Yildirim away steps, then an exact
/// rescale so every input point lies inside.
pub fn min_enclosing_ellipse(points: &[Vec2], tol: f64) -> Result<EllipseFit> {
    let m = points.len();
    if m < 3 {
        return Err(Error::Conditioning(format!("need at least 3 points for an ellipse, got {m}")));
    }
    let scale = points.iter().fold(0.0_f64, |a, p| a.max(p[0].abs()).max(p[1].abs())).max(1e-300);
    let q: Vec<Vector3<f64>> = points.iter().map(|p| Vector3::new(p[0] / scale, p[1] / scale, 1.0)).collect();
    let mut u = vec![1.0 / m as f64; m];
    let dim = 3.0;
    let max_iter = 200_000;
    let mut iterations = 0;
    let mut gap = f64::INFINITY;
    while iterations < max_iter {
        let mut x = Matrix3::zeros();
        for (qi, ui) in q.iter().zip(&u) {
            x += *ui * qi * qi.transpose();
        }
        let xi = x.try_inverse().ok_or_else(|| Error::Conditioning("points are collinear".into()))?;
        let mv: Vec<f64> = q.iter().map(|qi| (qi.transpose() * xi * qi)[0]).collect();
        let (j, mj) = mv.iter().enumerate().fold((0, f64::NEG_INFINITY), |b, (i, v)| if *v > b.1 { (i, *v) } else { b });
        let (k, mk) =
            mv.iter().enumerate().filter(|(i, _)| u[*i] > 0.0).fold((0, f64::INFINITY), |b, (i, v)| if *v < b.1 { (i, *v) } else { b });
        let up = mj / dim - 1.0;
        let down = 1.0 - mk / dim;
        gap = up.max(down);
        if gap <= tol {
            break;
        }
        iterations += 1;
        if up >= down {
            let step = (mj - dim) / (dim * (mj - 1.0));
            u.iter_mut().for_each(|v| *v *= 1.0 - step);
            u[j] += step;
        } else {
            let step = ((dim - mk) / (dim * (mk - 1.0))).min(u[k] / (1.0 - u[k]));
            u.iter_mut().for_each(|v| *v *= 1.0 + step);
            u[k] -= step;
            if u[k] < 1e-300 {
                u[k] = 0.0;
            }
        }
    }
    let mut c = [0.0; 2];
    let mut s = [[0.0; 2]; 2];
    for (qi, ui) in q.iter().zip(&u) {
        for a in 0..2 {
            c[a] += ui * qi[a];
            for b in 0..2 {
                s[a][b] += ui * qi[a] * qi[b];
            }
        }
    }
    for a in 0..2 {
        for b in 0..2 {
            s[a][b] -= c[a] * c[b];
        }
    }
    let inv = linalg::inverse(&s).ok_or_else(|| Error::Conditioning("degenerate ellipse".into()))?;
    let mut shape = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            shape[a][b] = inv[a][b] / (2.0 * scale * scale);
        }
    }
    let mut e = Ellipse { center: [c[0] * scale, c[1] * scale], shape };
    let worst = points.iter().map(|p| e.level(*p)).fold(0.0_f64, f64::max);
    if worst > 1.0 {
        for row in e.shape.iter_mut() {
            for v in row.iter_mut() {
                *v /= worst;
            }
        }
    }
    Ok(EllipseFit { ellipse: e, iterations, gap })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_points() {
        let pts: Vec<Vec2> = (0..64)
            .map(|k| {
                let t = k as f64 * std::f64::consts::TAU / 64.0;
                [2.0 + 3.0 * t.cos(), -1.0 + 3.0 * t.sin()]
            })
            .collect();
        let fit = min_enclosing_ellipse(&pts, 1e-9).unwrap();
        let e = fit.ellipse;
        assert!((e.center[0] - 2.0).abs() < 1e-7 && (e.center[1] + 1.0).abs() < 1e-7);
        assert!((e.area() - 9.0 * std::f64::consts::PI).abs() < 1e-6);
    }

    #[test]
    fn square_corners() {
        // the minimal ellipse through the corners of a square is its circumcircle
        let pts = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let e = min_enclosing_ellipse(&pts, 1e-10).unwrap().ellipse;
        assert!((e.area() - std::f64::consts::PI * 0.5).abs() < 1e-8);
        for p in pts {
            assert!(e.level(p) <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn axis_order() {
        let pts: Vec<Vec2> = (0..40)
            .map(|k| {
                let t = k as f64 * std::f64::consts::TAU / 40.0;
                [0.5 * t.cos(), 4.0 * t.sin()]
            })
            .collect();
        let e = min_enclosing_ellipse(&pts, 1e-10).unwrap().ellipse;
        let (len, dir) = e.axes();
        assert!((len[0] - 4.0).abs() < 1e-6 && (len[1] - 0.5).abs() < 1e-6);
        assert!(dir[0][1].abs() > 0.999);
    }

    #[test]
    fn collinear_rejected() {
        assert!(min_enclosing_ellipse(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]], 1e-9).is_err());
    }
}
