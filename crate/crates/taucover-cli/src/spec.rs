//! Problem-specification file: JSON describing the potential, table
//! orders, pencil sample points, solver problems and deformation fixtures.

use serde::Deserialize;
use taucover::frobenius::{EulerData, FrobeniusData, WDVVPotential};
use taucover::solver::ScalarICProblem;

use crate::CliError;

fn default_pmax() -> usize {
    4
}

fn default_dmax() -> u32 {
    6
}

#[derive(Deserialize, Clone, Debug)]
pub struct SpecFile {
    /// frobenius JSON: `{"n", "F", "euler"}`
    pub potential: serde_json::Value,
    #[serde(default = "default_pmax")]
    pub pmax: usize,
    #[serde(default = "default_dmax")]
    pub dmax: u32,
    #[serde(default)]
    pub pencil_samples: Vec<Vec<f64>>,
    #[serde(default)]
    pub solver: Option<SolverSection>,
    #[serde(default)]
    pub deformation: Option<DeformationSection>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Deserialize, Clone, Debug)]
pub struct SolverSection {
    pub problems: Vec<ScalarICProblem>,
}

/// Deformation fixture: corrections in canonical text form plus the
/// truncation degree; `k` optionally names an equivalence-shift generator.
#[derive(Deserialize, Clone, Debug)]
pub struct DeformationSection {
    pub d_max: u32,
    #[serde(default)]
    pub pmax: Option<usize>,
    #[serde(default)]
    pub p1_corrections: Vec<String>,
    #[serde(default)]
    pub h_corrections: Vec<HCorrection>,
    #[serde(default)]
    pub k: Option<String>,
}

#[derive(Deserialize, Clone, Debug)]
pub struct HCorrection {
    /// 1-based alpha
    pub alpha: usize,
    pub p: i64,
    pub term: String,
}

impl SpecFile {
    pub fn load(path: &std::path::Path) -> Result<(Self, String), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::MissingFixture(format!("{}: {e}", path.display())))?;
        let spec: SpecFile =
            serde_json::from_str(&text).map_err(|e| CliError::BadSpec(e.to_string()))?;
        Ok((spec, text))
    }

    pub fn analyze(&self) -> Result<(FrobeniusData, Option<EulerData>), CliError> {
        let (pot, euler) = WDVVPotential::from_json(&self.potential)
            .map_err(|e| CliError::BadSpec(e.to_string()))?;
        let data = taucover::frobenius::analyze(&pot, euler.clone())?;
        Ok((data, euler))
    }
}
