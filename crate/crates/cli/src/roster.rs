//! The frozen discrimination roster for projection-tail classification.

use std::path::Path;

use dyadlab_core::config::{GridConfig, OperatorSpec};
use dyadlab_core::diagnostics::{projection_tail_curve, Decay, DecayCurve, Exponents};
use dyadlab_core::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RosterEntry {
    pub label: String,
    pub grid: GridConfig,
    pub operator: OperatorSpec,
    pub expect: Decay,
    /// Defaults to `0..min(L, M)`.
    #[serde(default)]
    pub ns: Option<Vec<i32>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Roster {
    pub exponents: Exponents,
    pub budget: usize,
    pub seed: u64,
    pub threshold: f64,
    pub entries: Vec<RosterEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RosterResult {
    pub label: String,
    pub expect: Decay,
    pub got: Decay,
    pub ratio: f64,
    pub curve: DecayCurve,
}

impl Roster {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    pub fn run_entry(&self, e: &RosterEntry) -> Result<RosterResult> {
        let grid = e.grid.build()?;
        let t = e.operator.build(&grid)?;
        let ns = e.ns.clone().unwrap_or_else(|| (0..grid.fine_level().min(grid.window_exp())).collect());
        let curve = projection_tail_curve(&t, &grid, &ns, &self.exponents, None, self.budget, self.seed)?;
        let first = curve.envelope.first().copied().unwrap_or(0.0);
        let ratio = if first > 0.0 { curve.envelope.last().unwrap() / first } else { 0.0 };
        Ok(RosterResult { label: e.label.clone(), expect: e.expect, got: curve.classify(self.threshold), ratio, curve })
    }
}
