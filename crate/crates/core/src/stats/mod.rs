//! Sensitivity metrics, importance-weighted mean estimation, bootstrap intervals
//! and correlation utilities.

mod ad;
mod anova;
pub mod bootstrap;
mod correlation;
mod estimate;
mod linear;
pub mod sensitivity;

pub use ad::ad_k_sample;
pub use anova::{f_test, ks_sensitivity, ks_two_sample};
pub use bootstrap::{bootstrap_ci_bca, BcaInterval, BootstrapConfig, ConfidenceInterval};
pub use correlation::{midranks, pearson, spearman};
pub use estimate::{arithmetic_mean, weighted_mean, weighted_mean_with, MeanEstimator, OutcomeSample};
pub use linear::{fit_linear, lr_sensitivity, LinearModelFit};
pub use sensitivity::{
    decision_score, group_by_option, sensitivity_report, sensitivity_report_with_ci, write_sensitivity_csv,
    SensitivityMethod, SensitivityScore,
};
