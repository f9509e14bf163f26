use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("malformed manifest: {0}")]
    Malformed(String),
    #[error("empty decision or option name")]
    EmptyName,
    #[error("duplicate decision name: {0}")]
    DuplicateDecision(String),
    #[error("duplicate option {option} in decision {decision}")]
    DuplicateOption { decision: String, option: String },
    #[error("decision cardinality < 2: {0}")]
    Cardinality(String),
    #[error("unknown decision: {0}")]
    UnknownDecision(String),
    #[error("unknown option {option} for decision {decision}")]
    UnknownOption { decision: String, option: String },
    #[error("exclusion rule needs at least 2 bindings")]
    RuleTooNarrow,
    #[error("empty multiverse: every combination is excluded")]
    EmptyMultiverse,
    #[error("decision space too large to enumerate ({0} combinations)")]
    TooLarge(usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplerError {
    #[error("all leverage scores are zero")]
    DegenerateDesign,
    #[error("empty universe set")]
    Empty,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("degenerate pooled sample: all values identical")]
    DegeneratePooled,
    #[error("need at least {needed} groups, got {got}")]
    TooFewGroups { needed: usize, got: usize },
    #[error("empty group")]
    EmptyGroup,
    #[error("not enough observations")]
    TooFewObservations,
    #[error("correlation undefined: zero variance input")]
    ZeroVariance,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("inclusion probability must be positive, got {0}")]
    NonPositiveWeight(f64),
    #[error("too many undefined bootstrap resamples ({dropped} of {total})")]
    TooManyDropped { dropped: usize, total: usize },
    #[error("bootstrap needs at least 100 resamples, got {0}")]
    TooFewResamples(usize),
}

#[derive(Debug, Error)]
pub enum TableError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing outcome column")]
    MissingOutcome,
    #[error("row {row}: outcome {value:?} is not a finite number")]
    BadOutcome { row: usize, value: String },
    #[error("row {row}: duplicate assignment")]
    DuplicateRow { row: usize },
    #[error("table has no rows")]
    Empty,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("burn-in {burn_in} must be smaller than the universe count {n}")]
    BurnIn { burn_in: usize, n: usize },
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}
