//! Synthetic multiverses with planted sensitivity, plus the precomputed-outcome table format.
//!
//! Each option contributes an independent `N(μ, σ²)` draw and a universe's outcome is
//! the sum over its decisions. Options with `μ = 0` are baseline options; a decision
//! whose options are all baseline is non-sensitive. Rare options are produced with
//! exclusion rules that remove most of their Cartesian cells.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, TableError};
use crate::model::{Decision, DecisionSpace, OptionDef, Universe};
use crate::sampler::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthOption {
    pub name: String,
    pub mean: f64,
}

impl SynthOption {
    pub fn is_baseline(&self) -> bool {
        self.mean == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthDecision {
    pub name: String,
    pub options: Vec<SynthOption>,
}

/// Extra mean added to universes matching every binding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub bindings: Vec<(String, String)>,
    pub shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub name: String,
    pub sigma: f64,
    pub decisions: Vec<SynthDecision>,
    /// Conjunctive exclusion rules as `(decision, option)` name pairs.
    pub exclusions: Vec<Vec<(String, String)>>,
    #[serde(default)]
    pub interactions: Vec<Interaction>,
    /// Intended order of sensitive decisions, most sensitive first.
    #[serde(default)]
    pub ranking: Vec<String>,
}

impl SynthSpec {
    /// Decisions with a non-baseline option or taking part in an interaction.
    pub fn true_sensitive(&self) -> Vec<String> {
        let interacting: HashSet<&str> = self
            .interactions
            .iter()
            .filter(|i| i.shift != 0.0)
            .flat_map(|i| i.bindings.iter().map(|(d, _)| d.as_str()))
            .collect();
        self.decisions
            .iter()
            .filter(|d| d.options.iter().any(|o| !o.is_baseline()) || interacting.contains(d.name.as_str()))
            .map(|d| d.name.clone())
            .collect()
    }

    pub fn space(&self) -> Result<DecisionSpace, ModelError> {
        let decisions = self
            .decisions
            .iter()
            .map(|d| Decision {
                name: d.name.clone(),
                options: d.options.iter().map(|o| OptionDef { name: o.name.clone() }).collect(),
            })
            .collect();
        let mut space = DecisionSpace::new(self.name.clone(), decisions, Vec::new(), None)?;
        for rule in &self.exclusions {
            let r = space.rule_from_names(rule.iter().map(|(d, o)| (d.as_str(), o.as_str())))?;
            space.rules.push(r);
        }
        Ok(space)
    }

    fn validate(&self) -> Result<(), ModelError> {
        if !(self.sigma > 0.0) {
            return Err(ModelError::Malformed("sigma must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub sensitive: Vec<String>,
    pub ranking: Vec<String>,
    pub true_mean: f64,
}

#[derive(Debug, Clone)]
pub struct SynthMultiverse {
    pub space: DecisionSpace,
    pub universes: Vec<Universe>,
    /// Outcome per universe id.
    pub outcomes: Vec<f64>,
    pub truth: Option<GroundTruth>,
}

impl SynthMultiverse {
    pub fn n(&self) -> usize {
        self.universes.len()
    }

    /// Mean of the realized outcomes over the whole multiverse.
    pub fn full_mean(&self) -> f64 {
        self.outcomes.iter().sum::<f64>() / self.outcomes.len() as f64
    }

    /// Writes the precomputed-outcome CSV: decision columns then `outcome`, one row per universe.
    pub fn write_table<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header: Vec<&str> = self.space.decisions.iter().map(|d| d.name.as_str()).collect();
        header.push("outcome");
        wr.write_record(&header)?;
        for (u, y) in self.universes.iter().zip(&self.outcomes) {
            let mut row: Vec<String> = self.space.assignment(u).into_iter().map(|(_, o)| o.to_string()).collect();
            row.push(y.to_string());
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Draws outcomes for every valid universe of `spec`. Deterministic given `seed`.
pub fn generate(spec: &SynthSpec, seed: u64) -> Result<SynthMultiverse, ModelError> {
    spec.validate()?;
    let space = spec.space()?;
    let universes = space.enumerate_universes()?;
    let interactions: Vec<(Vec<(usize, usize)>, f64)> = spec
        .interactions
        .iter()
        .map(|i| {
            let b = i
                .bindings
                .iter()
                .map(|(d, o)| space.resolve(d, o))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((b, i.shift))
        })
        .collect::<Result<_, ModelError>>()?;
    let expected = |u: &Universe| -> f64 {
        let main: f64 = u.options.iter().enumerate().map(|(d, &o)| spec.decisions[d].options[o].mean).sum();
        let extra: f64 = interactions
            .iter()
            .filter(|(b, _)| b.iter().all(|&(d, o)| u.options[d] == o))
            .map(|(_, s)| s)
            .sum();
        main + extra
    };
    let noise = Normal::new(0.0, spec.sigma).map_err(|e| ModelError::Malformed(e.to_string()))?;
    let mut rng = rng_for(seed, 0);
    let outcomes: Vec<f64> = universes
        .iter()
        .map(|u| expected(u) + (0..u.options.len()).map(|_| noise.sample(&mut rng)).sum::<f64>())
        .collect();
    let true_mean = universes.iter().map(expected).sum::<f64>() / universes.len() as f64;
    let sensitive = spec.true_sensitive();
    let ranking = if spec.ranking.is_empty() { sensitive.clone() } else { spec.ranking.clone() };
    Ok(SynthMultiverse {
        space,
        universes,
        outcomes,
        truth: Some(GroundTruth { sensitive, ranking, true_mean }),
    })
}

/// Reads a precomputed-outcome table. Options are ordered by first appearance and
/// missing combinations become full-assignment exclusion rules.
pub fn load_table<R: Read>(reader: R) -> Result<SynthMultiverse, TableError> {
    let mut rd = csv::Reader::from_reader(reader);
    let headers = rd.headers()?.clone();
    let outcome_col = headers.iter().position(|h| h == "outcome").ok_or(TableError::MissingOutcome)?;
    let decision_cols: Vec<usize> = (0..headers.len()).filter(|&c| c != outcome_col).collect();
    let mut options: Vec<Vec<String>> = vec![Vec::new(); decision_cols.len()];
    let mut rows: Vec<(Vec<usize>, f64)> = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let raw = rec.get(outcome_col).unwrap_or("");
        let y: f64 = raw
            .trim()
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| TableError::BadOutcome { row: i + 1, value: raw.to_string() })?;
        let mut assignment = Vec::with_capacity(decision_cols.len());
        for (d, &c) in decision_cols.iter().enumerate() {
            let v = rec.get(c).unwrap_or("").to_string();
            let idx = match options[d].iter().position(|o| *o == v) {
                Some(p) => p,
                None => {
                    options[d].push(v);
                    options[d].len() - 1
                }
            };
            assignment.push(idx);
        }
        rows.push((assignment, y));
    }
    if rows.is_empty() {
        return Err(TableError::Empty);
    }
    let decisions: Vec<Decision> = decision_cols
        .iter()
        .zip(&options)
        .map(|(&c, opts)| Decision {
            name: headers[c].to_string(),
            options: opts.iter().map(|o| OptionDef { name: o.clone() }).collect(),
        })
        .collect();
    let mut space = DecisionSpace::new("table", decisions, Vec::new(), None)?;

    let mut by_assignment: HashMap<Vec<usize>, f64> = HashMap::with_capacity(rows.len());
    for (i, (a, y)) in rows.into_iter().enumerate() {
        if by_assignment.insert(a, y).is_some() {
            return Err(TableError::DuplicateRow { row: i + 1 });
        }
    }
    let full = space.enumerate_universes()?;
    for u in &full {
        if !by_assignment.contains_key(&u.options) {
            let names: Vec<(String, String)> = space
                .assignment(u)
                .into_iter()
                .map(|(d, o)| (d.to_string(), o.to_string()))
                .collect();
            let rule = space.rule_from_names(names.iter().map(|(d, o)| (d.as_str(), o.as_str())))?;
            space.rules.push(rule);
        }
    }
    let universes = space.enumerate_universes()?;
    let outcomes = universes.iter().map(|u| by_assignment[&u.options]).collect();
    Ok(SynthMultiverse { space, universes, outcomes, truth: None })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preset {
    D1,
    D2,
    D3,
    D4,
    D5,
}

impl Preset {
    pub const ALL: [Preset; 5] = [Preset::D1, Preset::D2, Preset::D3, Preset::D4, Preset::D5];
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "D1" => Ok(Preset::D1),
            "D2" => Ok(Preset::D2),
            "D3" => Ok(Preset::D3),
            "D4" => Ok(Preset::D4),
            "D5" => Ok(Preset::D5),
            _ => Err(format!("unknown preset {s:?} (expected D1..D5)")),
        }
    }
}

/// Tunable magnitudes behind the presets, in units of `σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PresetParams {
    pub sigma: f64,
    /// Mean of the rare influential option.
    pub influential: f64,
    /// Mean of the non-baseline option in distractor decisions.
    pub distractor: f64,
    /// Mean shift added to the rare interacting cell.
    pub interaction: f64,
}

impl Default for PresetParams {
    fn default() -> Self {
        PresetParams { sigma: 1.0, influential: 6.0, distractor: 3.0, interaction: 6.0 }
    }
}

pub fn preset(p: Preset) -> SynthSpec {
    preset_with(p, PresetParams::default())
}

pub fn preset_with(p: Preset, params: PresetParams) -> SynthSpec {
    let s = params.sigma;
    let mut b = SpecBuilder::new(format!("{p}"), s);
    match p {
        Preset::D1 => {
            b.decision("S", &[0.0, 0.0, 0.0, params.influential * s]);
            b.baseline("N1", 3);
            b.baseline("N2", 4);
            b.baseline("N3", 3);
            b.baseline("N4", 4);
            b.rare("S", 3, &[("N1", &[1, 2]), ("N2", &[2, 3]), ("N3", &[2])]);
            b.ranking(&["S"]);
        }
        Preset::D2 => {
            b.decision("A", &[0.0, params.distractor * s]);
            b.decision("B", &[0.0, 0.5 * params.distractor * s]);
            for i in 1..=6 {
                b.baseline(&format!("N{i}"), 2);
            }
            // The interacting cell A=a1, B=b1 keeps a quarter of its combinations.
            b.rare_cell(&[("A", 1), ("B", 1)], &[("N1", &[1]), ("N2", &[1])]);
            b.interaction(&[("A", 1), ("B", 1)], params.interaction * s);
            b.ranking(&["A", "B"]);
        }
        Preset::D3 => {
            // 50 options: the 5 impactful ones and 20 baseline ones are rare.
            let mut means = vec![0.0; 50];
            for (i, m) in [2.0, 3.0, 4.0, 5.0, 6.0].iter().enumerate() {
                means[45 + i] = m * s;
            }
            b.decision("S", &means);
            b.baseline("N1", 2);
            b.baseline("N2", 3);
            b.baseline("N3", 2);
            b.baseline("N4", 2);
            // Alternate the excluded N1 level so N1 stays unconfounded with S.
            for o in 25..50 {
                b.rare("S", o, &[("N1", &[(o + 1) % 2])]);
            }
            b.ranking(&["S"]);
        }
        Preset::D4 => {
            b.decision("S1", &[0.0, 0.0, 0.0, params.influential * s]);
            b.decision("S2", &[0.0, 0.0, params.distractor * s]);
            b.decision("S3", &[0.0, params.distractor * s]);
            for i in 1..=4 {
                b.baseline(&format!("N{i}"), 3);
            }
            b.rare("S1", 3, &[("N1", &[1, 2]), ("N2", &[1, 2]), ("N3", &[1])]);
            b.ranking(&["S3", "S2", "S1"]);
        }
        Preset::D5 => {
            b.decision("S", &[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, params.influential * s]);
            b.baseline("N1", 3);
            b.baseline("N2", 4);
            b.baseline("N3", 3);
            b.baseline("N4", 4);
            for o in 2..7 {
                b.rare("S", o, &[("N1", &[1, 2]), ("N2", &[2, 3])]);
            }
            b.ranking(&["S"]);
        }
    }
    b.build()
}

struct SpecBuilder {
    spec: SynthSpec,
}

impl SpecBuilder {
    fn new(name: String, sigma: f64) -> Self {
        SpecBuilder {
            spec: SynthSpec {
                name,
                sigma,
                decisions: Vec::new(),
                exclusions: Vec::new(),
                interactions: Vec::new(),
                ranking: Vec::new(),
            },
        }
    }

    fn option_name(decision: &str, o: usize) -> String {
        format!("{}{o}", decision.to_ascii_lowercase())
    }

    fn decision(&mut self, name: &str, means: &[f64]) {
        self.spec.decisions.push(SynthDecision {
            name: name.to_string(),
            options: means
                .iter()
                .enumerate()
                .map(|(o, &mean)| SynthOption { name: Self::option_name(name, o), mean })
                .collect(),
        });
    }

    fn baseline(&mut self, name: &str, k: usize) {
        self.decision(name, &vec![0.0; k]);
    }

    /// Excludes `decision=option` together with each listed partner option, so the
    /// option keeps only the cells whose partners are outside those lists.
    fn rare(&mut self, decision: &str, option: usize, partners: &[(&str, &[usize])]) {
        self.rare_cell(&[(decision, option)], partners);
    }

    fn rare_cell(&mut self, cell: &[(&str, usize)], partners: &[(&str, &[usize])]) {
        let base: Vec<(String, String)> =
            cell.iter().map(|&(d, o)| (d.to_string(), Self::option_name(d, o))).collect();
        for &(partner, opts) in partners {
            for &o in opts {
                let mut rule = base.clone();
                rule.push((partner.to_string(), Self::option_name(partner, o)));
                self.spec.exclusions.push(rule);
            }
        }
    }

    fn interaction(&mut self, cell: &[(&str, usize)], shift: f64) {
        self.spec.interactions.push(Interaction {
            bindings: cell.iter().map(|&(d, o)| (d.to_string(), Self::option_name(d, o))).collect(),
            shift,
        });
    }

    fn ranking(&mut self, names: &[&str]) {
        self.spec.ranking = names.iter().map(|s| s.to_string()).collect();
    }

    fn build(self) -> SynthSpec {
        self.spec
    }
}
