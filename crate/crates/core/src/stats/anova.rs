//! One-way ANOVA F statistic and the pairwise two-sample Kolmogorov–Smirnov score.

use crate::error::StatsError;

/// One-way ANOVA F (between-group mean square over within-group mean square).
///
/// Returns `f64::INFINITY` when the groups differ in mean but have no within-group
/// spread, and `0.0` when every observation is identical.
pub fn f_test<G: AsRef<[f64]>>(groups: &[G]) -> Result<f64, StatsError> {
    let k = groups.len();
    if k < 2 {
        return Err(StatsError::TooFewGroups { needed: 2, got: k });
    }
    if groups.iter().any(|g| g.as_ref().is_empty()) {
        return Err(StatsError::EmptyGroup);
    }
    let n: usize = groups.iter().map(|g| g.as_ref().len()).sum();
    if n <= k {
        return Err(StatsError::TooFewObservations);
    }
    let grand = groups.iter().flat_map(|g| g.as_ref().iter()).sum::<f64>() / n as f64;
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let g = g.as_ref();
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        ss_between += g.len() as f64 * (mean - grand).powi(2);
        ss_within += g.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    }
    let ms_between = ss_between / (k - 1) as f64;
    let ms_within = ss_within / (n - k) as f64;
    if ms_within == 0.0 {
        return Ok(if ms_between == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(ms_between / ms_within)
}

/// Two-sample Kolmogorov–Smirnov D: the sup-norm distance between empirical CDFs.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptyGroup);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let x = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < na && a[i] == x {
            i += 1;
        }
        while j < nb && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    Ok(d)
}

/// Largest pairwise two-sample D across all option groups.
pub fn ks_sensitivity<G: AsRef<[f64]>>(groups: &[G]) -> Result<f64, StatsError> {
    let k = groups.len();
    if k < 2 {
        return Err(StatsError::TooFewGroups { needed: 2, got: k });
    }
    let mut best: f64 = 0.0;
    for i in 0..k {
        for j in (i + 1)..k {
            best = best.max(ks_two_sample(groups[i].as_ref(), groups[j].as_ref())?);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f_test_cases() {
        assert_eq!(f_test(&[vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]]).unwrap(), 0.0);
        assert_eq!(f_test(&[vec![0.0; 3], vec![1.0; 3]]).unwrap(), f64::INFINITY);
        assert_eq!(f_test(&[vec![2.0; 3], vec![2.0; 3]]).unwrap(), 0.0);
        assert!(f_test(&[vec![1.0], vec![2.0]]).is_err());
    }

    #[test]
    fn f_test_textbook() {
        // Three groups with means 2, 5, 8 and unit within-group spread.
        let g = [vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0], vec![7.0, 8.0, 9.0]];
        // SSB = 3*(9+0+9) = 54, MSB = 27; SSW = 6, MSW = 1.
        assert!((f_test(&g).unwrap() - 27.0).abs() < 1e-12);
    }

    #[test]
    fn ks_cases() {
        let same = [vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]];
        assert_eq!(ks_sensitivity(&same).unwrap(), 0.0);
        assert_eq!(ks_sensitivity(&[vec![0.0, 1.0], vec![10.0, 11.0]]).unwrap(), 1.0);
        assert!(ks_sensitivity(&[vec![0.0], vec![]]).is_err());
        // Half the mass shifted.
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[2.0, 3.0]).unwrap(), 0.5);
    }
}
