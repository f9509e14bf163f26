//! Decision spaces, universe enumeration and one-hot design matrices.

use std::collections::{BTreeMap, HashMap, HashSet};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Upper bound on the Cartesian product size we are willing to walk.
const MAX_PRODUCT: usize = 50_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptionDef {
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub name: String,
    pub options: Vec<OptionDef>,
}

impl Decision {
    pub fn cardinality(&self) -> usize {
        self.options.len()
    }

    pub fn option_index(&self, name: &str) -> Option<usize> {
        self.options.iter().position(|o| o.name == name)
    }
}

/// A conjunctive partial assignment. A universe matching every binding is invalid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExclusionRule {
    /// `(decision index, option index)` pairs, sorted by decision index.
    bindings: Vec<(usize, usize)>,
}

impl ExclusionRule {
    pub fn bindings(&self) -> &[(usize, usize)] {
        &self.bindings
    }

    pub fn matches(&self, options: &[usize]) -> bool {
        self.bindings.iter().all(|&(d, o)| options[d] == o)
    }

    /// Whether this rule constrains `decision`, i.e. it describes a dependency.
    pub fn involves(&self, decision: usize) -> bool {
        self.bindings.iter().any(|&(d, _)| d == decision)
    }
}

/// Manifest document as it appears on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub name: String,
    pub decisions: Vec<ManifestDecision>,
    #[serde(default)]
    pub constraints: Vec<ManifestConstraint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestDecision {
    pub name: String,
    pub options: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestConstraint {
    pub exclude: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionSpace {
    pub name: String,
    pub decisions: Vec<Decision>,
    pub rules: Vec<ExclusionRule>,
    pub command: Option<String>,
}

/// One valid decision assignment. `options[i]` indexes into `decisions[i].options`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Universe {
    pub id: usize,
    pub options: Vec<usize>,
}

pub fn parse_manifest(text: &str) -> Result<DecisionSpace, ModelError> {
    let manifest: Manifest =
        serde_json::from_str(text).map_err(|e| ModelError::Malformed(e.to_string()))?;
    DecisionSpace::from_manifest(&manifest)
}

impl DecisionSpace {
    pub fn from_manifest(manifest: &Manifest) -> Result<Self, ModelError> {
        let decisions = manifest
            .decisions
            .iter()
            .map(|d| Decision {
                name: d.name.clone(),
                options: d.options.iter().map(|o| OptionDef { name: o.clone() }).collect(),
            })
            .collect();
        let mut space = DecisionSpace {
            name: manifest.name.clone(),
            decisions,
            rules: Vec::new(),
            command: manifest.command.clone(),
        };
        space.validate_decisions()?;
        for c in &manifest.constraints {
            let rule = space.rule_from_names(c.exclude.iter().map(|(k, v)| (k.as_str(), v.as_str())))?;
            space.rules.push(rule);
        }
        Ok(space)
    }

    /// Builds a space directly, validating the same invariants as manifest parsing.
    pub fn new(
        name: impl Into<String>,
        decisions: Vec<Decision>,
        rules: Vec<ExclusionRule>,
        command: Option<String>,
    ) -> Result<Self, ModelError> {
        let space = DecisionSpace { name: name.into(), decisions, rules, command };
        space.validate_decisions()?;
        for rule in &space.rules {
            space.validate_rule(&rule.bindings)?;
        }
        Ok(space)
    }

    fn validate_decisions(&self) -> Result<(), ModelError> {
        if self.decisions.is_empty() {
            return Err(ModelError::Malformed("no decisions".into()));
        }
        let mut seen = HashSet::new();
        for d in &self.decisions {
            if d.name.is_empty() {
                return Err(ModelError::EmptyName);
            }
            if !seen.insert(d.name.as_str()) {
                return Err(ModelError::DuplicateDecision(d.name.clone()));
            }
            if d.options.len() < 2 {
                return Err(ModelError::Cardinality(d.name.clone()));
            }
            let mut opts = HashSet::new();
            for o in &d.options {
                if o.name.is_empty() {
                    return Err(ModelError::EmptyName);
                }
                if !opts.insert(o.name.as_str()) {
                    return Err(ModelError::DuplicateOption {
                        decision: d.name.clone(),
                        option: o.name.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    fn validate_rule(&self, bindings: &[(usize, usize)]) -> Result<(), ModelError> {
        if bindings.len() < 2 {
            return Err(ModelError::RuleTooNarrow);
        }
        for &(d, o) in bindings {
            let dec = self
                .decisions
                .get(d)
                .ok_or_else(|| ModelError::UnknownDecision(format!("#{d}")))?;
            if o >= dec.options.len() {
                return Err(ModelError::UnknownOption {
                    decision: dec.name.clone(),
                    option: format!("#{o}"),
                });
            }
        }
        Ok(())
    }

    /// Builds a rule from `(decision, option)` name pairs.
    pub fn rule_from_names<'a>(
        &self,
        pairs: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<ExclusionRule, ModelError> {
        let mut bindings = Vec::new();
        for (d, o) in pairs {
            let (di, oi) = self.resolve(d, o)?;
            if bindings.iter().any(|&(x, _)| x == di) {
                return Err(ModelError::Malformed(format!("decision {d} bound twice in one rule")));
            }
            bindings.push((di, oi));
        }
        bindings.sort_unstable();
        self.validate_rule(&bindings)?;
        Ok(ExclusionRule { bindings })
    }

    pub fn decision_index(&self, name: &str) -> Option<usize> {
        self.decisions.iter().position(|d| d.name == name)
    }

    /// Resolves a `(decision, option)` name pair into indices.
    pub fn resolve(&self, decision: &str, option: &str) -> Result<(usize, usize), ModelError> {
        let di = self
            .decision_index(decision)
            .ok_or_else(|| ModelError::UnknownDecision(decision.to_string()))?;
        let oi = self.decisions[di].option_index(option).ok_or_else(|| ModelError::UnknownOption {
            decision: decision.to_string(),
            option: option.to_string(),
        })?;
        Ok((di, oi))
    }

    /// Number of decisions, `m`.
    pub fn m(&self) -> usize {
        self.decisions.len()
    }

    /// Total option count, i.e. the width of the one-hot encoding.
    pub fn total_options(&self) -> usize {
        self.decisions.iter().map(Decision::cardinality).sum()
    }

    /// `|Θ|`, saturating on overflow.
    pub fn product_size(&self) -> usize {
        self.decisions
            .iter()
            .try_fold(1usize, |acc, d| acc.checked_mul(d.cardinality()))
            .unwrap_or(usize::MAX)
    }

    pub fn is_excluded(&self, options: &[usize]) -> bool {
        self.rules.iter().any(|r| r.matches(options))
    }

    /// Enumerates valid universes in odometer order (last decision varies fastest).
    pub fn enumerate_universes(&self) -> Result<Vec<Universe>, ModelError> {
        let product = self.product_size();
        if product > MAX_PRODUCT {
            return Err(ModelError::TooLarge(product));
        }
        let index = RuleIndex::new(&self.rules);
        let m = self.m();
        let mut current = vec![0usize; m];
        let mut out = Vec::new();
        'outer: loop {
            if !index.excludes(&current) {
                out.push(Universe { id: out.len(), options: current.clone() });
            }
            for pos in (0..m).rev() {
                current[pos] += 1;
                if current[pos] < self.decisions[pos].cardinality() {
                    continue 'outer;
                }
                current[pos] = 0;
            }
            break;
        }
        if out.is_empty() {
            return Err(ModelError::EmptyMultiverse);
        }
        Ok(out)
    }

    pub fn option_name(&self, decision: usize, option: usize) -> &str {
        &self.decisions[decision].options[option].name
    }

    /// Name-level view of a universe's assignment, in decision order.
    pub fn assignment<'a>(&'a self, universe: &Universe) -> Vec<(&'a str, &'a str)> {
        universe
            .options
            .iter()
            .enumerate()
            .map(|(d, &o)| (self.decisions[d].name.as_str(), self.option_name(d, o)))
            .collect()
    }

    /// Substitutes `{id}` and `{<decision>}` placeholders in the command template.
    pub fn render_command(&self, universe: &Universe) -> Option<String> {
        let template = self.command.as_ref()?;
        let mut cmd = template.replace("{id}", &universe.id.to_string());
        for (d, o) in self.assignment(universe) {
            cmd = cmd.replace(&format!("{{{d}}}"), o);
        }
        Some(cmd)
    }

    pub fn to_manifest(&self) -> Manifest {
        Manifest {
            name: self.name.clone(),
            decisions: self
                .decisions
                .iter()
                .map(|d| ManifestDecision {
                    name: d.name.clone(),
                    options: d.options.iter().map(|o| o.name.clone()).collect(),
                })
                .collect(),
            constraints: self
                .rules
                .iter()
                .map(|r| ManifestConstraint {
                    exclude: r
                        .bindings
                        .iter()
                        .map(|&(d, o)| (self.decisions[d].name.clone(), self.option_name(d, o).to_string()))
                        .collect(),
                })
                .collect(),
            command: self.command.clone(),
        }
    }

    /// Universes adopting `option` for `decision`.
    pub fn stratum<'u>(
        &self,
        universes: &'u [Universe],
        decision: &str,
        option: &str,
    ) -> Result<Vec<&'u Universe>, ModelError> {
        let (di, oi) = self.resolve(decision, option)?;
        Ok(universes.iter().filter(|u| u.options[di] == oi).collect())
    }

    /// Stratum sizes per decision and option, indexed `[decision][option]`.
    pub fn stratum_sizes(&self, universes: &[Universe]) -> Vec<Vec<usize>> {
        let mut sizes: Vec<Vec<usize>> = self.decisions.iter().map(|d| vec![0; d.cardinality()]).collect();
        for u in universes {
            for (d, &o) in u.options.iter().enumerate() {
                sizes[d][o] += 1;
            }
        }
        sizes
    }
}

/// Rules grouped by the set of decisions they bind, for hash lookups during enumeration.
struct RuleIndex {
    groups: Vec<(Vec<usize>, HashSet<Vec<usize>>)>,
}

impl RuleIndex {
    fn new(rules: &[ExclusionRule]) -> Self {
        let mut by_key: HashMap<Vec<usize>, HashSet<Vec<usize>>> = HashMap::new();
        for r in rules {
            let key: Vec<usize> = r.bindings.iter().map(|&(d, _)| d).collect();
            let val: Vec<usize> = r.bindings.iter().map(|&(_, o)| o).collect();
            by_key.entry(key).or_default().insert(val);
        }
        let mut groups: Vec<_> = by_key.into_iter().collect();
        groups.sort_by(|a, b| a.0.cmp(&b.0));
        RuleIndex { groups }
    }

    fn excludes(&self, options: &[usize]) -> bool {
        let mut probe = Vec::new();
        self.groups.iter().any(|(decisions, cells)| {
            probe.clear();
            probe.extend(decisions.iter().map(|&d| options[d]));
            cells.contains(&probe)
        })
    }
}

/// Identifies one column of an encoded design matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ColumnKey {
    Main { decision: usize, option: usize },
    Pair { a: (usize, usize), b: (usize, usize) },
}

#[derive(Debug, Clone)]
pub struct EncodedDesign {
    pub matrix: DMatrix<f64>,
    pub columns: Vec<ColumnKey>,
}

impl EncodedDesign {
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn column(&self, decision: usize, option: usize) -> Option<usize> {
        self.columns
            .iter()
            .position(|c| *c == ColumnKey::Main { decision, option })
    }

    /// Column indices belonging to one decision's main-effect block.
    pub fn decision_columns(&self, decision: usize) -> Vec<usize> {
        self.columns
            .iter()
            .enumerate()
            .filter_map(|(i, c)| match c {
                ColumnKey::Main { decision: d, .. } if *d == decision => Some(i),
                _ => None,
            })
            .collect()
    }
}

/// Full one-hot encoding: every option gets a column, no reference level and no intercept.
/// Row `i` corresponds to `universes[i]`.
pub fn encode_one_hot(space: &DecisionSpace, universes: &[Universe]) -> EncodedDesign {
    encode(space, universes, false)
}

/// One-hot encoding extended with indicator columns for every cross-decision option pair.
pub fn encode_with_interactions(space: &DecisionSpace, universes: &[Universe]) -> EncodedDesign {
    encode(space, universes, true)
}

fn encode(space: &DecisionSpace, universes: &[Universe], pairs: bool) -> EncodedDesign {
    let mut columns = Vec::new();
    let mut offsets = Vec::with_capacity(space.m());
    for (d, dec) in space.decisions.iter().enumerate() {
        offsets.push(columns.len());
        columns.extend((0..dec.cardinality()).map(|o| ColumnKey::Main { decision: d, option: o }));
    }
    let main_width = columns.len();
    let mut pair_offsets = HashMap::new();
    if pairs {
        for a in 0..space.m() {
            for b in (a + 1)..space.m() {
                pair_offsets.insert((a, b), columns.len());
                for oa in 0..space.decisions[a].cardinality() {
                    for ob in 0..space.decisions[b].cardinality() {
                        columns.push(ColumnKey::Pair { a: (a, oa), b: (b, ob) });
                    }
                }
            }
        }
    }
    let mut matrix = DMatrix::<f64>::zeros(universes.len(), columns.len());
    for (row, u) in universes.iter().enumerate() {
        for (d, &o) in u.options.iter().enumerate() {
            matrix[(row, offsets[d] + o)] = 1.0;
        }
        if pairs {
            for a in 0..space.m() {
                for b in (a + 1)..space.m() {
                    let kb = space.decisions[b].cardinality();
                    let col = pair_offsets[&(a, b)] + u.options[a] * kb + u.options[b];
                    matrix[(row, col)] = 1.0;
                }
            }
        }
    }
    debug_assert!(main_width <= columns.len());
    EncodedDesign { matrix, columns }
}
