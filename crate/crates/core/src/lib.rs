//! Numerical toolkit for Abreu's equation `S(u) = A` on convex polygons.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod bernstein;
pub mod calculus;
pub mod conjugate;
pub mod ellipse;
pub mod error;
pub mod estimates;
pub mod forcing;
pub mod io;
pub mod jet;
pub mod linalg;
pub mod polytope;
pub mod potential;
pub mod quadrature;
pub mod sections;
pub mod solver;
pub mod stability;

pub use error::{Error, Result};
pub use jet::Jet4;
pub use linalg::{Mat2, Vec2};
pub use polytope::Polygon;
pub use potential::{ConvexPotential, SymplecticPotential};
