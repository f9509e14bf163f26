//! Per-decision sensitivity scores over a set of completed universes.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::bootstrap::{bootstrap_ci_bca, BootstrapConfig, ConfidenceInterval};
use super::{ad_k_sample, f_test, fit_linear, ks_sensitivity, lr_sensitivity, OutcomeSample};
use crate::model::{encode_one_hot, DecisionSpace, Universe};

/// Minimum samples per option before the AD statistic is reported.
pub const MIN_PER_OPTION_AD: usize = 3;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensitivityMethod {
    #[default]
    Ad,
    F,
    Ks,
    Lr,
}

impl SensitivityMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            SensitivityMethod::Ad => "ad",
            SensitivityMethod::F => "f",
            SensitivityMethod::Ks => "ks",
            SensitivityMethod::Lr => "lr",
        }
    }

    /// Per-option sample count a decision needs before it gets a score.
    pub fn min_per_option(self) -> usize {
        match self {
            SensitivityMethod::Ad => MIN_PER_OPTION_AD,
            _ => 1,
        }
    }
}

impl fmt::Display for SensitivityMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SensitivityMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ad" => Ok(SensitivityMethod::Ad),
            "f" => Ok(SensitivityMethod::F),
            "ks" => Ok(SensitivityMethod::Ks),
            "lr" => Ok(SensitivityMethod::Lr),
            other => Err(format!("unknown sensitivity method {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityScore {
    pub decision: String,
    pub method: SensitivityMethod,
    /// `None` whenever `defined` is false.
    pub score: Option<f64>,
    pub defined: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci: Option<ConfidenceInterval>,
}

/// Outcomes of one decision grouped by option, in option order.
pub fn group_by_option(space: &DecisionSpace, universes: &[Universe], samples: &[OutcomeSample], decision: usize) -> Vec<Vec<f64>> {
    let mut groups = vec![Vec::new(); space.decisions[decision].cardinality()];
    for s in samples {
        groups[universes[s.universe_id].options[decision]].push(s.y);
    }
    groups
}

/// Score for one decision, or `None` when the sample-size gate fails or the
/// statistic is undefined on this sample.
pub fn decision_score(
    space: &DecisionSpace,
    universes: &[Universe],
    samples: &[OutcomeSample],
    decision: usize,
    method: SensitivityMethod,
) -> Option<f64> {
    let groups = group_by_option(space, universes, samples, decision);
    if groups.iter().any(|g| g.len() < method.min_per_option()) {
        return None;
    }
    match method {
        SensitivityMethod::Ad => ad_k_sample(&groups).ok(),
        SensitivityMethod::F => f_test(&groups).ok(),
        SensitivityMethod::Ks => ks_sensitivity(&groups).ok(),
        SensitivityMethod::Lr => {
            let rows: Vec<Universe> = samples.iter().map(|s| universes[s.universe_id].clone()).collect();
            let design = encode_one_hot(space, &rows);
            let y: Vec<f64> = samples.iter().map(|s| s.y).collect();
            let fit = fit_linear(&design.matrix, &y);
            Some(lr_sensitivity(&fit, &design, decision))
        }
    }
}

/// Scores for every decision in manifest order.
///
/// `universes` is the full enumerated space (`universes[i].id == i`); `samples`
/// are the completed universes with finite outcomes.
pub fn sensitivity_report(
    space: &DecisionSpace,
    universes: &[Universe],
    samples: &[OutcomeSample],
    method: SensitivityMethod,
) -> Vec<SensitivityScore> {
    if method == SensitivityMethod::Lr {
        return lr_report(space, universes, samples);
    }
    space
        .decisions
        .iter()
        .enumerate()
        .map(|(d, dec)| {
            let score = decision_score(space, universes, samples, d, method);
            SensitivityScore { decision: dec.name.clone(), method, defined: score.is_some(), score, ci: None }
        })
        .collect()
}

/// One regression shared across decisions.
fn lr_report(space: &DecisionSpace, universes: &[Universe], samples: &[OutcomeSample]) -> Vec<SensitivityScore> {
    let gate: Vec<bool> = (0..space.m())
        .map(|d| group_by_option(space, universes, samples, d).iter().all(|g| !g.is_empty()))
        .collect();
    let fit = gate.iter().any(|&g| g).then(|| {
        let rows: Vec<Universe> = samples.iter().map(|s| universes[s.universe_id].clone()).collect();
        let design = encode_one_hot(space, &rows);
        let y: Vec<f64> = samples.iter().map(|s| s.y).collect();
        (fit_linear(&design.matrix, &y), design)
    });
    space
        .decisions
        .iter()
        .enumerate()
        .map(|(d, dec)| {
            let score = match (&fit, gate[d]) {
                (Some((fit, design)), true) => Some(lr_sensitivity(fit, design, d)),
                _ => None,
            };
            SensitivityScore {
                decision: dec.name.clone(),
                method: SensitivityMethod::Lr,
                defined: score.is_some(),
                score,
                ci: None,
            }
        })
        .collect()
}

/// [`sensitivity_report`] plus a BCa interval per defined decision, bootstrapping
/// over completed universes.
pub fn sensitivity_report_with_ci(
    space: &DecisionSpace,
    universes: &[Universe],
    samples: &[OutcomeSample],
    method: SensitivityMethod,
    bootstrap: BootstrapConfig,
) -> Vec<SensitivityScore> {
    let mut report = sensitivity_report(space, universes, samples, method);
    for (d, row) in report.iter_mut().enumerate() {
        if !row.defined || !row.score.is_some_and(f64::is_finite) {
            continue;
        }
        let cfg = BootstrapConfig { seed: bootstrap.seed.wrapping_add(d as u64 * 0x9E37_79B9), ..bootstrap };
        row.ci = bootstrap_ci_bca(samples, |s| decision_score(space, universes, s, d, method), cfg)
            .ok()
            .map(|b| b.ci);
    }
    report
}

/// Writes `decision,method,score,ci_lo,ci_hi,defined` rows.
pub fn write_sensitivity_csv<W: Write>(rows: &[SensitivityScore], w: W) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["decision", "method", "score", "ci_lo", "ci_hi", "defined"])?;
    let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        wr.write_record([
            r.decision.clone(),
            r.method.to_string(),
            fmt(r.score),
            fmt(r.ci.map(|c| c.lo)),
            fmt(r.ci.map(|c| c.hi)),
            r.defined.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}
