use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub version: String,
    pub scenario: String,
    /// How the classical oscillator is normalized, when the scenario fixes it.
    pub convention: Option<String>,
    pub seed: Option<u64>,
    pub rng: Option<String>,
    /// Reported on the console only, so that reruns produce identical files.
    #[serde(skip)]
    pub wall_time_s: f64,
}

/// A finished run: the configuration it came from and one row per output
/// step. Missing values (e.g. a per-step energy at the first discrete
/// index) are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub metadata: Metadata,
    pub config: ScenarioConfig,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl RunRecord {
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn last(&self, name: &str) -> Option<f64> {
        self.column(name)?.last().copied().flatten()
    }
}
