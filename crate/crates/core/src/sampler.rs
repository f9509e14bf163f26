//! Sampling orders over universes: uniform, round-robin stratified, and leverage-score sketching.
//!
//! Every planner returns a full permutation of universe ids together with the
//! per-draw density `g` used to reweight outcomes when estimating the mean.
//! All randomness comes from ChaCha8 seeded through [`rng_for`], which is portable
//! across platforms and word sizes.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::SVD;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::SamplerError;
use crate::model::{encode_one_hot, encode_with_interactions, DecisionSpace, EncodedDesign, Universe};

/// Singular values at or below this are treated as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Leverage below this is treated as exactly zero.
pub const ZERO_LEVERAGE: f64 = 1e-12;

/// Smallest density a plan records; keeps importance weights finite for zero-leverage rows.
pub const MIN_DENSITY: f64 = 1e-12;

/// Seeded generator for stream `stream` of `seed`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Uniform,
    RoundRobin,
    Sketching,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 3] = [SamplerKind::Uniform, SamplerKind::RoundRobin, SamplerKind::Sketching];

    pub fn as_str(self) -> &'static str {
        match self {
            SamplerKind::Uniform => "uniform",
            SamplerKind::RoundRobin => "round_robin",
            SamplerKind::Sketching => "sketching",
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SamplerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(SamplerKind::Uniform),
            "round_robin" | "round-robin" => Ok(SamplerKind::RoundRobin),
            "sketching" => Ok(SamplerKind::Sketching),
            other => Err(format!("unknown sampler {other:?} (expected uniform, round_robin or sketching)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub kind: SamplerKind,
    pub seed: u64,
    /// Permutation of `0..n`.
    pub order: Vec<usize>,
    /// Density recorded for the universe at the same position of `order`.
    pub g: Vec<f64>,
}

impl SamplePlan {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Density indexed by universe id rather than draw position.
    pub fn density_by_id(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.order.len()];
        for (&id, &g) in self.order.iter().zip(&self.g) {
            out[id] = g;
        }
        out
    }

    /// Writes `order_index,universe_id,g` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["order_index", "universe_id", "g"])?;
        for (i, (&id, &g)) in self.order.iter().zip(&self.g).enumerate() {
            wr.write_record([i.to_string(), id.to_string(), format!("{g:e}")])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Options that only matter for some planners.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerOptions {
    /// Add pairwise interaction columns to the sketching design.
    pub interactions: bool,
}

/// Builds a plan of the requested kind over an enumerated space.
pub fn build_plan(
    kind: SamplerKind,
    space: &DecisionSpace,
    universes: &[Universe],
    seed: u64,
    options: SamplerOptions,
) -> Result<SamplePlan, SamplerError> {
    if universes.is_empty() {
        return Err(SamplerError::Empty);
    }
    match kind {
        SamplerKind::Uniform => Ok(plan_uniform(universes.len(), seed)),
        SamplerKind::RoundRobin => Ok(plan_round_robin(space, universes, seed)),
        SamplerKind::Sketching => {
            let x = if options.interactions {
                encode_with_interactions(space, universes)
            } else {
                encode_one_hot(space, universes)
            };
            plan_sketching(&x, seed)
        }
    }
}

pub fn plan_uniform(n: usize, seed: u64) -> SamplePlan {
    let mut rng = rng_for(seed, 0);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let g = vec![1.0 / n as f64; n];
    SamplePlan { kind: SamplerKind::Uniform, seed, order, g }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeverageScores {
    pub l: Vec<f64>,
    /// Encoded dimension (column count of the design).
    pub d: usize,
    /// Numerical rank; equals `l.iter().sum()` up to rounding.
    pub rank: usize,
}

/// Diagonal of `U Uᵀ` from the thin SVD of `X`, restricted to non-negligible singular values.
pub fn leverage_scores(x: &EncodedDesign) -> LeverageScores {
    let n = x.rows();
    let d = x.dim();
    if n == 0 || d == 0 {
        return LeverageScores { l: vec![0.0; n], d, rank: 0 };
    }
    let svd = SVD::new(x.matrix.clone(), true, false);
    let u = svd.u.as_ref().expect("U requested");
    let keep: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > RANK_TOLERANCE)
        .map(|(j, _)| j)
        .collect();
    let l = (0..n)
        .map(|i| {
            let l = keep.iter().map(|&j| u[(i, j)] * u[(i, j)]).sum::<f64>().min(1.0);
            // Rows orthogonal to the kept singular vectors come back as rounding noise.
            if l < ZERO_LEVERAGE { 0.0 } else { l }
        })
        .collect();
    LeverageScores { l, d, rank: keep.len() }
}

/// Weighted sampling without replacement proportional to leverage scores.
///
/// Uses exponential keys `ln(u) / l_i`, which yields the same distribution over
/// orders as drawing sequentially with weights renormalized over the remaining set.
/// Zero-leverage rows come last in uniformly random order.
pub fn plan_sketching(x: &EncodedDesign, seed: u64) -> Result<SamplePlan, SamplerError> {
    let lev = leverage_scores(x);
    let n = lev.l.len();
    if n == 0 {
        return Err(SamplerError::Empty);
    }
    if lev.l.iter().all(|&l| l <= 0.0) {
        return Err(SamplerError::DegenerateDesign);
    }
    let mut rng = rng_for(seed, 0);
    let mut keyed: Vec<(bool, f64, usize)> = lev
        .l
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            if l > 0.0 {
                (false, u.ln() / l, i)
            } else {
                (true, u, i)
            }
        })
        .collect();
    // Positive weights first, larger key first.
    keyed.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.total_cmp(&a.1)));
    let order: Vec<usize> = keyed.into_iter().map(|(_, _, i)| i).collect();
    let g = sketching_density(&lev, &order);
    Ok(SamplePlan { kind: SamplerKind::Sketching, seed, order, g })
}

/// Leverage density `l_i / d` for each draw, clamped into `(0, 1]`.
fn sketching_density(lev: &LeverageScores, order: &[usize]) -> Vec<f64> {
    let d = lev.d as f64;
    order.iter().map(|&i| (lev.l[i] / d).clamp(MIN_DENSITY, 1.0)).collect()
}

/// Probability that a universe enters a round in which it may be picked by any of
/// `m` independent per-decision draws, each uniform over a stratum of the given size.
///
/// This is the inclusion-exclusion sum `Σ q_j − Σ q_j q_k + …` with `q_j = 1/size_j`,
/// evaluated through its closed form `1 − Π (1 − q_j)`.
pub fn inclusion_probability_round(sizes: &[usize]) -> f64 {
    debug_assert!(sizes.iter().all(|&s| s >= 1));
    let miss: f64 = sizes.iter().map(|&s| 1.0 - 1.0 / s as f64).product();
    (1.0 - miss).clamp(0.0, 1.0)
}

/// Remaining universes per `(decision, option)` stratum with O(1) removal.
struct Strata {
    members: Vec<Vec<Vec<usize>>>,
    /// `slot[d][u]` is the index of universe `u` inside its stratum for decision `d`.
    slot: Vec<Vec<usize>>,
}

impl Strata {
    fn new(space: &DecisionSpace, universes: &[Universe]) -> Self {
        let mut members: Vec<Vec<Vec<usize>>> =
            space.decisions.iter().map(|d| vec![Vec::new(); d.cardinality()]).collect();
        let mut slot = vec![vec![0; universes.len()]; space.m()];
        for (pos, u) in universes.iter().enumerate() {
            for (d, &o) in u.options.iter().enumerate() {
                slot[d][pos] = members[d][o].len();
                members[d][o].push(pos);
            }
        }
        Strata { members, slot }
    }

    fn remove(&mut self, pos: usize, universe: &Universe) {
        for (d, &o) in universe.options.iter().enumerate() {
            let stratum = &mut self.members[d][o];
            let at = self.slot[d][pos];
            stratum.swap_remove(at);
            if let Some(&moved) = stratum.get(at) {
                self.slot[d][moved] = at;
            }
        }
    }

    fn sizes(&self) -> Vec<Vec<usize>> {
        self.members.iter().map(|d| d.iter().map(Vec::len).collect()).collect()
    }
}

/// Round-robin stratified sampling: each round visits every decision and, within it,
/// every option in manifest order, drawing one not-yet-selected universe uniformly
/// from the option's remaining stratum when that stratum is nonempty.
///
/// `universes` must be the enumerated space with `universes[i].id == i`.
pub fn plan_round_robin(space: &DecisionSpace, universes: &[Universe], seed: u64) -> SamplePlan {
    let n = universes.len();
    let mut rng = rng_for(seed, 0);
    let mut strata = Strata::new(space, universes);
    let mut order = Vec::with_capacity(n);
    let mut g = Vec::with_capacity(n);
    let mut sizes_scratch = Vec::with_capacity(space.m());
    while order.len() < n {
        let round_sizes = strata.sizes();
        for d in 0..space.m() {
            for o in 0..space.decisions[d].cardinality() {
                let stratum = &strata.members[d][o];
                if stratum.is_empty() {
                    continue;
                }
                let pos = stratum[rng.gen_range(0..stratum.len())];
                let u = &universes[pos];
                sizes_scratch.clear();
                sizes_scratch.extend(u.options.iter().enumerate().map(|(dd, &oo)| round_sizes[dd][oo]));
                g.push(inclusion_probability_round(&sizes_scratch));
                order.push(u.id);
                strata.remove(pos, u);
            }
        }
    }
    SamplePlan { kind: SamplerKind::RoundRobin, seed, order, g }
}
