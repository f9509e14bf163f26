//! Offline benchmarks over multiverses with known outcomes: how early each sampler
//! meets the termination conditions, averaged correlation trajectories, and the mean
//! squared error of the bias-corrected mean.

use std::io::Write;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::EvalError;
use crate::model::Universe;
use crate::sampler::{build_plan, rng_for, SamplePlan, SamplerKind, SamplerOptions};
use crate::stats::bootstrap::quantile_sorted;
use crate::stats::{ad_k_sample, pearson, spearman, MeanEstimator};
use crate::synth::SynthMultiverse;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchConfig {
    pub repeats: usize,
    pub pearson_threshold: f64,
    pub spearman_target: f64,
    pub min_per_option: usize,
    /// Draws discarded before the MSE average; defaults to the total option count.
    pub burn_in: Option<usize>,
    /// Evaluate trajectories every `stride` draws (the final draw is always included).
    pub stride: usize,
    pub sampler: SamplerOptions,
    /// Decisions whose ranking must be recovered; defaults to the ground-truth sensitive set.
    pub sensitive: Option<Vec<String>>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            repeats: 50,
            pearson_threshold: 0.95,
            spearman_target: 1.0,
            min_per_option: 3,
            burn_in: None,
            stride: 1,
            sampler: SamplerOptions::default(),
            sensitive: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Summary {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            median: quantile_sorted(&v, 0.5),
            q1: quantile_sorted(&v, 0.25),
            q3: quantile_sorted(&v, 0.75),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchResult {
    pub sampler: SamplerKind,
    /// Fraction of the multiverse drawn when the conditions first held, per repeat.
    pub fractions: Vec<f64>,
    pub summary: Summary,
}

impl BenchResult {
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["repeat", "fraction"])?;
        for (i, f) in self.fractions.iter().enumerate() {
            wr.write_record([i.to_string(), f.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Seed for repeat `r`, drawn from its own stream so repeats can run in any order.
pub fn repeat_seed(seed: u64, repeat: usize) -> u64 {
    rng_for(seed, repeat as u64).next_u64()
}

/// Incremental per-option sample bookkeeping for one progressive draw sequence.
struct Progress<'a> {
    mv: &'a SynthMultiverse,
    groups: Vec<Vec<Vec<f64>>>,
    deficient: usize,
    min_per_option: usize,
}

impl<'a> Progress<'a> {
    fn new(mv: &'a SynthMultiverse, min_per_option: usize) -> Self {
        let groups: Vec<Vec<Vec<f64>>> =
            mv.space.decisions.iter().map(|d| vec![Vec::new(); d.cardinality()]).collect();
        let deficient = if min_per_option == 0 { 0 } else { mv.space.total_options() };
        Progress { mv, groups, deficient, min_per_option }
    }

    fn add(&mut self, universe: &Universe) {
        let y = self.mv.outcomes[universe.id];
        for (d, &o) in universe.options.iter().enumerate() {
            let g = &mut self.groups[d][o];
            g.push(y);
            if g.len() == self.min_per_option {
                self.deficient -= 1;
            }
        }
    }

    fn gate_met(&self) -> bool {
        self.deficient == 0
    }

    /// AD score per decision; `None` if any decision's statistic is undefined.
    fn scores(&self) -> Option<Vec<f64>> {
        self.groups.iter().map(|g| ad_k_sample(g).ok()).collect()
    }
}

/// AD score per decision on the full multiverse. Undefined scores become 0.
pub fn full_scores(mv: &SynthMultiverse) -> Vec<f64> {
    let mut p = Progress::new(mv, 0);
    for u in &mv.universes {
        p.add(u);
    }
    p.groups.iter().map(|g| ad_k_sample(g).unwrap_or(0.0)).collect()
}

struct Targets {
    full: Vec<f64>,
    sensitive_idx: Vec<usize>,
    full_sensitive: Vec<f64>,
}

impl Targets {
    fn new(mv: &SynthMultiverse, cfg: &BenchConfig) -> Self {
        let full = full_scores(mv);
        let names: Vec<String> = cfg
            .sensitive
            .clone()
            .or_else(|| mv.truth.as_ref().map(|t| t.sensitive.clone()))
            .unwrap_or_default();
        let sensitive_idx: Vec<usize> = names.iter().filter_map(|n| mv.space.decision_index(n)).collect();
        let full_sensitive = sensitive_idx.iter().map(|&i| full[i]).collect();
        Targets { full, sensitive_idx, full_sensitive }
    }

    fn ranking_applies(&self) -> bool {
        self.sensitive_idx.len() >= 2
    }

    fn pearson(&self, sample: &[f64]) -> Option<f64> {
        pearson(sample, &self.full).ok()
    }

    fn spearman(&self, sample: &[f64]) -> Option<f64> {
        let s: Vec<f64> = self.sensitive_idx.iter().map(|&i| sample[i]).collect();
        spearman(&s, &self.full_sensitive).ok()
    }
}

fn plan_for(mv: &SynthMultiverse, kind: SamplerKind, cfg: &BenchConfig, seed: u64, repeat: usize) -> Result<SamplePlan, EvalError> {
    Ok(build_plan(kind, &mv.space, &mv.universes, repeat_seed(seed, repeat), cfg.sampler)?)
}

/// Draws universes in plan order until (a) Pearson of sample vs full AD scores exceeds
/// the threshold, (b) Spearman over the sensitive decisions reaches the target (vacuous
/// with fewer than two), and (c) every option has `min_per_option` samples.
pub fn termination_benchmark(
    mv: &SynthMultiverse,
    kind: SamplerKind,
    cfg: &BenchConfig,
    seed: u64,
) -> Result<BenchResult, EvalError> {
    let targets = Targets::new(mv, cfg);
    let n = mv.n();
    let fractions = (0..cfg.repeats)
        .into_par_iter()
        .map(|r| {
            let plan = plan_for(mv, kind, cfg, seed, r)?;
            let mut progress = Progress::new(mv, cfg.min_per_option);
            for (t, &id) in plan.order.iter().enumerate() {
                progress.add(&mv.universes[id]);
                if !progress.gate_met() {
                    continue;
                }
                let Some(scores) = progress.scores() else { continue };
                let pearson_ok = targets.pearson(&scores).is_some_and(|p| p > cfg.pearson_threshold);
                if !pearson_ok {
                    continue;
                }
                let ranking_ok = !targets.ranking_applies()
                    || targets.spearman(&scores).is_some_and(|s| s >= cfg.spearman_target - 1e-9);
                if ranking_ok {
                    return Ok((t + 1) as f64 / n as f64);
                }
            }
            Ok(1.0)
        })
        .collect::<Result<Vec<f64>, EvalError>>()?;
    let summary = Summary::of(&fractions);
    Ok(BenchResult { sampler: kind, fractions, summary })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub sampler: SamplerKind,
    pub t: Vec<usize>,
    pub pearson_mean: Vec<f64>,
    /// Absent when fewer than two decisions are ranked.
    pub spearman_mean: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "pearson_mean", "spearman_mean"])?;
        for (i, t) in self.t.iter().enumerate() {
            let s = self.spearman_mean.as_ref().map(|s| s[i].to_string()).unwrap_or_default();
            wr.write_record([t.to_string(), self.pearson_mean[i].to_string(), s])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Correlations between sample and full-data AD scores as draws accumulate, averaged
/// over repeats. Undefined correlations count as 0.
pub fn correlation_trajectory(
    mv: &SynthMultiverse,
    kind: SamplerKind,
    cfg: &BenchConfig,
    seed: u64,
) -> Result<Trajectory, EvalError> {
    let targets = Targets::new(mv, cfg);
    let n = mv.n();
    let stride = cfg.stride.max(1);
    let mut checkpoints: Vec<usize> = (1..=n).filter(|t| t % stride == 0).collect();
    if checkpoints.last() != Some(&n) {
        checkpoints.push(n);
    }
    let per_repeat = (0..cfg.repeats)
        .into_par_iter()
        .map(|r| {
            let plan = plan_for(mv, kind, cfg, seed, r)?;
            let mut progress = Progress::new(mv, cfg.min_per_option);
            let mut pear = Vec::with_capacity(checkpoints.len());
            let mut spear = Vec::with_capacity(checkpoints.len());
            let mut next = 0;
            for (t, &id) in plan.order.iter().enumerate() {
                progress.add(&mv.universes[id]);
                if checkpoints[next] != t + 1 {
                    continue;
                }
                next += 1;
                let scores = if progress.gate_met() { progress.scores() } else { None };
                pear.push(scores.as_ref().and_then(|s| targets.pearson(s)).unwrap_or(0.0));
                spear.push(scores.as_ref().and_then(|s| targets.spearman(s)).unwrap_or(0.0));
            }
            Ok((pear, spear))
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    let reps = per_repeat.len().max(1) as f64;
    let average = |pick: fn(&(Vec<f64>, Vec<f64>)) -> &Vec<f64>| -> Vec<f64> {
        (0..checkpoints.len())
            .map(|i| per_repeat.iter().map(|r| pick(r)[i]).sum::<f64>() / reps)
            .collect()
    };
    let pearson_mean = average(|r| &r.0);
    let spearman_mean = targets.ranking_applies().then(|| average(|r| &r.1));
    Ok(Trajectory { sampler: kind, t: checkpoints, pearson_mean, spearman_mean })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MseResult {
    pub sampler: SamplerKind,
    pub corrected: bool,
    pub burn_in: usize,
    pub per_repeat: Vec<f64>,
    pub mse: f64,
}

/// Mean squared error of the progressive mean estimate against the full-data mean,
/// `1/(n − b) Σ_{i=b}^{n} (ȳ_i − μ)²`, averaged over repeats.
///
/// With `corrected` the estimate is the importance-weighted mean using the plan's
/// densities; otherwise the arithmetic mean of the draws so far.
pub fn bias_mse_experiment(
    mv: &SynthMultiverse,
    kind: SamplerKind,
    cfg: &BenchConfig,
    seed: u64,
    corrected: bool,
    estimator: MeanEstimator,
) -> Result<MseResult, EvalError> {
    let n = mv.n();
    let b = cfg.burn_in.unwrap_or_else(|| mv.space.total_options());
    if b >= n {
        return Err(EvalError::BurnIn { burn_in: b, n });
    }
    let mu = mv.full_mean();
    let f = 1.0 / n as f64;
    let per_repeat = (0..cfg.repeats)
        .into_par_iter()
        .map(|r| {
            let plan = plan_for(mv, kind, cfg, seed, r)?;
            let (mut num, mut den) = (0.0, 0.0);
            let mut acc = 0.0;
            for (t, (&id, &g)) in plan.order.iter().zip(&plan.g).enumerate() {
                let i = t + 1;
                let y = mv.outcomes[id];
                let w = if corrected { f / g } else { 1.0 };
                num += y * w;
                den += w;
                if i < b {
                    continue;
                }
                let est = match (corrected, estimator) {
                    (true, MeanEstimator::SelfNormalized) => num / den,
                    _ => num / i as f64,
                };
                acc += (est - mu).powi(2);
            }
            Ok(acc / (n - b) as f64)
        })
        .collect::<Result<Vec<f64>, EvalError>>()?;
    let mse = per_repeat.iter().sum::<f64>() / per_repeat.len().max(1) as f64;
    Ok(MseResult { sampler: kind, corrected, burn_in: b, per_repeat, mse })
}
