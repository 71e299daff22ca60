use thiserror::Error;

use crate::linalg::Vec2;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A polygon failed one of its load-time invariants.
    #[error("invalid polygon: {invariant} ({detail})")]
    InvalidPolygon { invariant: &'static str, detail: String },

    #[error("point ({}, {}) lies outside the polygon", .0[0], .0[1])]
    OutsideDomain(Vec2),

    #[error("point ({}, {}) is on or beyond the boundary where the potential is singular", .0[0], .0[1])]
    SingularPoint(Vec2),

    #[error("Hessian not positive definite at ({}, {}): min eigenvalue {min_eig:e}", .at[0], .at[1])]
    NotConvex { at: Vec2, min_eig: f64 },

    #[error("inconsistent data: {0}")]
    Inconsistent(String),

    #[error("solver did not converge after {iterations} iterations (rms residual {residual_rms:e})")]
    Diverged { iterations: usize, residual_rms: f64 },

    #[error("convexity lost at the smallest admissible step (iteration {iteration})")]
    Barrier { iteration: usize },

    #[error("section at level {level} escapes the domain")]
    NonCompactSection { level: f64 },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("ill-conditioned input: {0}")]
    Conditioning(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("expression error: {0}")]
    Expression(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
