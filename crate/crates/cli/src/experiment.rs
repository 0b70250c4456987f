//! JSON experiment files.

use std::path::Path;

use dyadlab_core::config::{FunctionSpec, GridConfig, OperatorSpec, WeightSpec};
use dyadlab_core::diagnostics::ReportConfig;
use dyadlab_core::lorentz::deserialize_exponent;
use dyadlab_core::lorentz::serialize_exponent;
use dyadlab_core::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    /// Seed for probe streams and random samples; `--seed` overrides it.
    #[serde(default)]
    pub seed: u64,
    /// Input of `norm`.
    #[serde(default)]
    pub function: Option<FunctionSpec>,
    /// Inputs of `apply`.
    #[serde(default)]
    pub inputs: Option<[FunctionSpec; 2]>,
    #[serde(default)]
    pub operator: Option<OperatorSpec>,
    #[serde(default)]
    pub norm: Option<NormSection>,
    #[serde(default)]
    pub weights: Option<WeightsSection>,
    #[serde(default)]
    pub diagnostics: Option<ReportConfig>,
    /// Input weights `(w1, w2)` for `diag`.
    #[serde(default)]
    pub diag_weights: Option<[WeightSpec; 2]>,
    #[serde(default)]
    pub selfcheck: Option<SelfcheckSection>,
    #[serde(default)]
    pub output: Option<OutputSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormSection {
    pub p: f64,
    #[serde(serialize_with = "serialize_exponent", deserialize_with = "deserialize_exponent")]
    pub q: f64,
    /// Measure `w dx`; Lebesgue when absent.
    #[serde(default)]
    pub weight: Option<WeightSpec>,
    /// Radii `A` for `||f 1_{B(0, A)^c}||`.
    #[serde(default)]
    pub tails: Vec<f64>,
    /// Lattice shifts `h` for `||tau_h f - f||`.
    #[serde(default)]
    pub shifts: Vec<f64>,
    /// Radii `r` for `||S_r f||`.
    #[serde(default)]
    pub radii: Vec<f64>,
    #[serde(default = "half")]
    pub a: f64,
}

fn half() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSection {
    pub weights: Vec<WeightSpec>,
    /// One exponent per weight.
    #[serde(deserialize_with = "exponents")]
    pub p: Vec<f64>,
    /// Compare the multilinear constant with its constituent conditions.
    #[serde(default)]
    pub factorization: bool,
}

fn exponents<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    struct E(#[serde(deserialize_with = "deserialize_exponent")] f64);
    Ok(Vec::<E>::deserialize(d)?.into_iter().map(|e| e.0).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelfcheckSection {
    #[serde(default = "hundred")]
    pub samples: usize,
}

fn hundred() -> usize {
    100
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub dir: Option<String>,
    #[serde(default)]
    pub format: Option<Format>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        let cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks that need no computation.
    pub fn validate(&self) -> Result<()> {
        self.grid.build()?;
        if let Some(w) = &self.weights {
            if w.weights.is_empty() || w.weights.len() != w.p.len() {
                return Err(Error::config("weights and p must be nonempty and of equal length"));
            }
        }
        if let Some(d) = &self.diagnostics {
            d.exponents.validate()?;
        }
        if let Some(n) = &self.norm {
            if !(n.p > 0.0 && n.p.is_finite() && n.q > 0.0) {
                return Err(Error::config("norm needs 0 < p < inf and q > 0"));
            }
        }
        Ok(())
    }

    pub fn minimal(grid: GridConfig) -> Self {
        ExperimentConfig {
            grid,
            seed: 0,
            function: None,
            inputs: None,
            operator: None,
            norm: None,
            weights: None,
            diagnostics: None,
            diag_weights: None,
            selfcheck: None,
            output: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unknown_keys_and_bad_sections() {
        let ok = r#"{"grid": {"l": 2, "m": 2}, "weights": {"weights": [{"name": "one"}], "p": ["inf"]}}"#;
        let cfg: ExperimentConfig = serde_json::from_str(ok).unwrap();
        assert!(cfg.weights.as_ref().unwrap().p[0].is_infinite());
        cfg.validate().unwrap();
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"grid": {"l": 2, "m": 2}, "extra": 1}"#).is_err());
        let bad: ExperimentConfig =
            serde_json::from_str(r#"{"grid": {"l": 2, "m": 2}, "weights": {"weights": [], "p": [2]}}"#).unwrap();
        assert!(bad.validate().is_err());
        let grid: ExperimentConfig = serde_json::from_str(r#"{"grid": {"l": 40, "m": 2}}"#).unwrap();
        assert!(grid.validate().is_err());
    }
}
