//! Per-universe execution records and the result line a universe prints.

use serde::{Deserialize, Serialize};

use crate::diagnostics::Diagnostic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Warning,
    Error,
    Timeout,
    InvalidOutput,
}

impl Status {
    /// Ok and warning universes carry an outcome and feed the estimates.
    pub fn has_outcome(self) -> bool {
        matches!(self, Status::Ok | Status::Warning)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniverseResult {
    pub universe_id: usize,
    /// Position of the universe in the sampling plan.
    pub order_index: usize,
    /// Density the plan recorded for this draw.
    pub g: f64,
    pub status: Status,
    pub outcome: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted: Option<Vec<f64>>,
    #[serde(default)]
    pub exit_code: Option<i32>,
    #[serde(default)]
    pub stderr_text: String,
    #[serde(default)]
    pub diagnostics: Vec<Diagnostic>,
    /// Wall-clock seconds spent executing.
    pub duration: f64,
    /// Seconds since the run started, on the coordinator's monotonic clock.
    pub admitted_at: f64,
    pub completed_at: f64,
}

/// The single-line JSON record a universe prints last on stdout.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ResultLine {
    pub outcome: f64,
    #[serde(default)]
    pub quality: Option<f64>,
    #[serde(default)]
    pub observed: Option<Vec<f64>>,
    #[serde(default)]
    pub predicted: Option<Vec<f64>>,
}

/// Parses the last non-empty line of `stdout`. Non-finite outcomes are rejected.
pub fn parse_result_line(stdout: &str) -> Option<ResultLine> {
    let line = stdout.lines().rev().find(|l| !l.trim().is_empty())?;
    let rec: ResultLine = serde_json::from_str(line.trim()).ok()?;
    rec.outcome.is_finite().then_some(rec)
}
