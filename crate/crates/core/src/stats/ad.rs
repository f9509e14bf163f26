//! k-sample Anderson–Darling statistic (Scholz & Stephens), midrank variant for tied data.

use crate::error::StatsError;

/// Standardized k-sample Anderson–Darling statistic `(A²_akN − (k − 1)) / σ_N`.
///
/// `A²_akN` is the tie-adjusted (midrank) form, so the result depends only on the
/// relative order of the pooled observations. Needs at least two nonempty groups
/// and at least four observations in total.
pub fn ad_k_sample<G: AsRef<[f64]>>(groups: &[G]) -> Result<f64, StatsError> {
    let k = groups.len();
    if k < 2 {
        return Err(StatsError::TooFewGroups { needed: 2, got: k });
    }
    let mut sorted: Vec<Vec<f64>> = Vec::with_capacity(k);
    for g in groups {
        let g = g.as_ref();
        if g.is_empty() {
            return Err(StatsError::EmptyGroup);
        }
        let mut v = g.to_vec();
        v.sort_by(f64::total_cmp);
        sorted.push(v);
    }
    let mut pooled: Vec<f64> = sorted.iter().flatten().copied().collect();
    pooled.sort_by(f64::total_cmp);
    let n_total = pooled.len();
    if n_total < 4 {
        return Err(StatsError::TooFewObservations);
    }
    if pooled[0] == pooled[n_total - 1] {
        return Err(StatsError::DegeneratePooled);
    }

    // Distinct pooled values with multiplicity and midrank position B_j.
    let mut distinct: Vec<(f64, f64, f64)> = Vec::new();
    let mut below = 0usize;
    let mut i = 0;
    while i < n_total {
        let z = pooled[i];
        let mut j = i;
        while j < n_total && pooled[j] == z {
            j += 1;
        }
        let l = (j - i) as f64;
        distinct.push((z, l, below as f64 + l / 2.0));
        below = j;
        i = j;
    }

    let nf = n_total as f64;
    let mut a2 = 0.0;
    for group in &sorted {
        let ni = group.len() as f64;
        let mut lo = 0usize;
        let mut inner = 0.0;
        for &(z, l, b) in &distinct {
            while lo < group.len() && group[lo] < z {
                lo += 1;
            }
            let mut hi = lo;
            while hi < group.len() && group[hi] == z {
                hi += 1;
            }
            let m = lo as f64 + (hi - lo) as f64 / 2.0;
            let num = nf * m - b * ni;
            inner += l / nf * num * num / (b * (nf - b) - nf * l / 4.0);
        }
        a2 += inner / ni;
    }
    a2 *= (nf - 1.0) / nf;

    let sizes: Vec<usize> = sorted.iter().map(Vec::len).collect();
    let sigma = ad_sigma(&sizes);
    Ok((a2 - (k as f64 - 1.0)) / sigma)
}

/// Standard deviation of `A²_kN` under the null, from the finite-sample variance formula.
fn ad_sigma(sizes: &[usize]) -> f64 {
    let k = sizes.len() as f64;
    let n: usize = sizes.iter().sum();
    let nf = n as f64;
    let big_h: f64 = sizes.iter().map(|&s| 1.0 / s as f64).sum();
    // h = Σ_{i<N} 1/i and g = Σ_{i=1}^{N-2} Σ_{j=i+1}^{N-1} 1/((N-i) j), the latter via a
    // running tail sum over 1/(N-i).
    let mut tail = 0.0;
    let mut g = 0.0;
    for t in 0..n.saturating_sub(2) {
        tail += 1.0 / (n - 1 - t) as f64;
        g += tail / (t + 2) as f64;
    }
    let h = tail + 1.0;
    let a = (4.0 * g - 6.0) * (k - 1.0) + (10.0 - 6.0 * g) * big_h;
    let b = (2.0 * g - 4.0) * k * k + 8.0 * h * k + (2.0 * g - 14.0 * h - 4.0) * big_h - 8.0 * h + 4.0 * g - 6.0;
    let c = (6.0 * h + 2.0 * g - 2.0) * k * k + (4.0 * h - 4.0 * g + 6.0) * k + (2.0 * h - 6.0) * big_h + 4.0 * h;
    let d = (2.0 * h + 6.0) * k * k - 4.0 * h * k;
    let var = (a * nf.powi(3) + b * nf * nf + c * nf + d) / ((nf - 1.0) * (nf - 2.0) * (nf - 3.0));
    var.sqrt()
}
