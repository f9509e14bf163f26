//! Point-in-time statistics over the completed universes.

use std::sync::Arc;

use mverse_core::stats::sensitivity::sensitivity_report_with_ci;
use mverse_core::stats::{bootstrap_ci_bca, weighted_mean_with, BootstrapConfig, ConfidenceInterval, MeanEstimator};
use mverse_core::{DecisionSpace, OutcomeSample, SensitivityMethod, SensitivityScore, Universe};
use serde::{Deserialize, Serialize};

use crate::result::UniverseResult;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsConfig {
    pub method: SensitivityMethod,
    pub estimator: MeanEstimator,
    pub resamples: usize,
    pub seed: u64,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig {
            method: SensitivityMethod::Ad,
            estimator: MeanEstimator::default(),
            resamples: mverse_core::stats::bootstrap::LIVE_RESAMPLES,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressSnapshot {
    /// Seconds since the run started.
    pub t: f64,
    pub completed: usize,
    pub succeeded: usize,
    pub failed: usize,
    pub total: usize,
    pub mean: Option<f64>,
    pub mean_ci: Option<ConfidenceInterval>,
    pub sensitivity: Vec<SensitivityScore>,
    pub eta_seconds: Option<f64>,
}

pub fn outcome_samples<'a, I>(results: I) -> Vec<OutcomeSample>
where
    I: IntoIterator<Item = &'a UniverseResult>,
{
    results
        .into_iter()
        .filter_map(|r| r.outcome.filter(|_| r.status.has_outcome()).map(|y| OutcomeSample { universe_id: r.universe_id, y, g: r.g }))
        .collect()
}

/// Builds a snapshot from one consistent set of results.
pub fn compute_snapshot(
    space: &DecisionSpace,
    universes: &[Universe],
    results: &[Arc<UniverseResult>],
    cfg: &StatsConfig,
    t: f64,
    eta_seconds: Option<f64>,
) -> ProgressSnapshot {
    let n = universes.len();
    let samples = outcome_samples(results.iter().map(|r| r.as_ref()));
    let boot = BootstrapConfig { resamples: cfg.resamples, seed: cfg.seed, level: 0.95 };
    let mean = weighted_mean_with(&samples, n, cfg.estimator).ok();
    let mean_ci = (samples.len() >= 2)
        .then(|| bootstrap_ci_bca(&samples, |s| weighted_mean_with(s, n, cfg.estimator).ok(), boot).ok())
        .flatten()
        .map(|b| b.ci);
    let sensitivity = sensitivity_report_with_ci(space, universes, &samples, cfg.method, boot);
    ProgressSnapshot {
        t,
        completed: results.len(),
        succeeded: samples.len(),
        failed: results.len() - samples.len(),
        total: n,
        mean,
        mean_ci,
        sensitivity,
        eta_seconds,
    }
}
