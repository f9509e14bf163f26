//! Summaries behind the predictive-check view.

use mverse_client::wire::Summary;

/// One representative value per percentile bucket of the sorted data: the middle
/// element of each non-empty bucket. Returns at most 100 values, ascending.
pub fn quantile_dots(values: &[f64]) -> Vec<f64> {
    let sorted = sorted(values);
    let n = sorted.len();
    (0..100)
        .filter_map(|p| {
            let lo = p * n / 100;
            let hi = (p + 1) * n / 100;
            (hi > lo).then(|| sorted[(lo + hi - 1) / 2])
        })
        .collect()
}

pub fn summarize(values: &[f64]) -> Summary {
    let sorted = sorted(values);
    let n = sorted.len();
    if n == 0 {
        return Summary { n, min: f64::NAN, q1: f64::NAN, median: f64::NAN, q3: f64::NAN, max: f64::NAN, mean: f64::NAN };
    }
    Summary {
        n,
        min: sorted[0],
        q1: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        q3: quantile(&sorted, 0.75),
        max: sorted[n - 1],
        mean: sorted.iter().sum::<f64>() / n as f64,
    }
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Linear interpolation between order statistics.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    match sorted.get(i + 1) {
        Some(&next) => sorted[i] + frac * (next - sorted[i]),
        None => sorted[i],
    }
}
