//! Polygon and solution files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forcing::Forcing;
use crate::polytope::Polygon;
use crate::potential::{AffineShift, SymplecticPotential};
use crate::solver::{SolveMetadata, SolveResult};

/// A solved potential with the data needed to rebuild it exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionFile {
    pub polygon: Polygon,
    pub forcing: Forcing,
    pub correction_degree: usize,
    pub coefficients: Vec<f64>,
    pub affine_shift: AffineShift,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolveMetadata>,
}

impl SolutionFile {
    pub fn from_result(result: &SolveResult) -> Self {
        Self::from_potential(&result.potential, result.meta.forcing.clone(), Some(result.meta.clone()))
    }

    pub fn from_potential(pot: &SymplecticPotential, forcing: Forcing, solver: Option<SolveMetadata>) -> Self {
        SolutionFile {
            polygon: pot.polygon().clone(),
            forcing,
            correction_degree: pot.degree(),
            coefficients: pot.coefficients().to_vec(),
            affine_shift: pot.affine_shift(),
            solver,
        }
    }

    pub fn potential(&self) -> Result<SymplecticPotential> {
        let n = (self.correction_degree + 1).pow(2);
        if self.coefficients.len() != n {
            return Err(Error::Input(format!(
                "degree {} needs {n} coefficients, found {}",
                self.correction_degree,
                self.coefficients.len()
            )));
        }
        if self.coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Input("non-finite correction coefficient".into()));
        }
        Ok(SymplecticPotential::canonical(&self.polygon, self.correction_degree)
            .with_coefficients(self.coefficients.clone())?
            .with_affine_shift(self.affine_shift))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

pub fn polygon_from_json(text: &str) -> Result<Polygon> {
    Ok(serde_json::from_str(text)?)
}

pub fn load_polygon(path: &Path) -> Result<Polygon> {
    polygon_from_json(&std::fs::read_to_string(path)?)
}

/// `v` with 12 significant digits, positional for moderate magnitudes and
/// scientific otherwise.
pub fn format_sig12(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0.00000000000".into();
    }
    let sci = format!("{v:.11e}");
    let exp: i32 = sci[sci.find('e').map_or(sci.len(), |i| i + 1)..].parse().unwrap_or(0);
    if (-4..12).contains(&exp) {
        format!("{:.*}", (11 - exp) as usize, v)
    } else {
        sci
    }
}
