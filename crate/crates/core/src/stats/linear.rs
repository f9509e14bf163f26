use nalgebra::{DMatrix, DVector, SVD};
use serde::Serialize;

use crate::model::EncodedDesign;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearModelFit {
    pub beta: Vec<f64>,
    /// Residual variance `RSS / (n − rank)`; zero when the fit is saturated.
    pub residual_sigma2: f64,
    pub rank: usize,
}

/// Minimum-norm least squares through the SVD pseudo-inverse.
pub fn fit_linear(x: &DMatrix<f64>, y: &[f64]) -> LinearModelFit {
    assert_eq!(x.nrows(), y.len(), "design rows must align with outcomes");
    let n = y.len();
    let d = x.ncols();
    if n == 0 || d == 0 {
        return LinearModelFit { beta: vec![0.0; d], residual_sigma2: 0.0, rank: 0 };
    }
    let svd = SVD::new(x.clone(), true, true);
    let smax = svd.singular_values.max();
    let eps = 1e-10 * smax.max(1.0);
    let rank = svd.rank(eps);
    let yv = DVector::from_column_slice(y);
    let beta = svd.solve(&yv, eps).expect("U and V were computed");
    let resid = &yv - x * &beta;
    let rss = resid.norm_squared();
    let residual_sigma2 = if n > rank { rss / (n - rank) as f64 } else { 0.0 };
    LinearModelFit { beta: beta.iter().copied().collect(), residual_sigma2, rank }
}

/// Largest within-decision centered coefficient magnitude for `decision`'s option columns.
pub fn lr_sensitivity(fit: &LinearModelFit, design: &EncodedDesign, decision: usize) -> f64 {
    let cols = design.decision_columns(decision);
    if cols.is_empty() {
        return 0.0;
    }
    let mean = cols.iter().map(|&c| fit.beta[c]).sum::<f64>() / cols.len() as f64;
    cols.iter().map(|&c| (fit.beta[c] - mean).abs()).fold(0.0, f64::max)
}
