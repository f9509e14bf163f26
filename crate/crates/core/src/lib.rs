//! Progressive multiverse analysis: decision spaces, sampling plans with importance
//! densities, sensitivity statistics, synthetic benchmarks and their evaluation.

pub mod error;
pub mod eval;
pub mod model;
pub mod sampler;
pub mod stats;
pub mod synth;

pub use error::{EvalError, ModelError, SamplerError, StatsError, TableError};
pub use model::{encode_one_hot, parse_manifest, DecisionSpace, EncodedDesign, Manifest, Universe};
pub use sampler::{build_plan, SamplePlan, SamplerKind, SamplerOptions};
pub use stats::{OutcomeSample, SensitivityMethod, SensitivityScore};
