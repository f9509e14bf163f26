//! Straightforward reference implementations used to cross-check the library.
//! They favour direct transcription of textbook formulas over speed.
#![allow(dead_code)]

use nalgebra::DMatrix;

/// k-sample Anderson–Darling, midrank form, computed by direct counting over the
/// distinct pooled values. Returns `(A²_akN − (k − 1)) / σ_N`.
pub fn ad_brute(groups: &[Vec<f64>]) -> f64 {
    let k = groups.len();
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let n = pooled.len() as f64;
    let mut z: Vec<f64> = pooled.clone();
    z.sort_by(|a, b| a.partial_cmp(b).unwrap());
    z.dedup();

    let mut a2 = 0.0;
    for g in groups {
        let ni = g.len() as f64;
        let mut s = 0.0;
        for &zj in &z {
            let lj = pooled.iter().filter(|&&x| x == zj).count() as f64;
            let bj = pooled.iter().filter(|&&x| x < zj).count() as f64 + lj / 2.0;
            let fij = g.iter().filter(|&&x| x == zj).count() as f64;
            let mij = g.iter().filter(|&&x| x < zj).count() as f64 + fij / 2.0;
            let num = n * mij - ni * bj;
            s += lj * num * num / (bj * (n - bj) - n * lj / 4.0);
        }
        a2 += s / ni;
    }
    a2 *= (n - 1.0) / (n * n);

    let kf = k as f64;
    let hh: f64 = groups.iter().map(|g| 1.0 / g.len() as f64).sum();
    let nn = pooled.len();
    let h: f64 = (1..nn).map(|i| 1.0 / i as f64).sum();
    let mut gg = 0.0;
    for i in 1..=nn - 2 {
        for j in i + 1..=nn - 1 {
            gg += 1.0 / ((nn - i) as f64 * j as f64);
        }
    }
    let a = (4.0 * gg - 6.0) * (kf - 1.0) + (10.0 - 6.0 * gg) * hh;
    let b = (2.0 * gg - 4.0) * kf * kf + 8.0 * h * kf + (2.0 * gg - 14.0 * h - 4.0) * hh - 8.0 * h + 4.0 * gg - 6.0;
    let c = (6.0 * h + 2.0 * gg - 2.0) * kf * kf + (4.0 * h - 4.0 * gg + 6.0) * kf + (2.0 * h - 6.0) * hh + 4.0 * h;
    let d = (2.0 * h + 6.0) * kf * kf - 4.0 * h * kf;
    let var = (a * n.powi(3) + b * n * n + c * n + d) / ((n - 1.0) * (n - 2.0) * (n - 3.0));
    (a2 - (kf - 1.0)) / var.sqrt()
}

/// One-way ANOVA F from the textbook sums of squares.
pub fn anova_f(groups: &[Vec<f64>]) -> f64 {
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    let n = all.len() as f64;
    let k = groups.len() as f64;
    let grand = all.iter().sum::<f64>() / n;
    let mut ssb = 0.0;
    let mut ssw = 0.0;
    for g in groups {
        let m = g.iter().sum::<f64>() / g.len() as f64;
        ssb += g.len() as f64 * (m - grand).powi(2);
        ssw += g.iter().map(|x| (x - m).powi(2)).sum::<f64>();
    }
    (ssb / (k - 1.0)) / (ssw / (n - k))
}

/// Two-sample K–S D by evaluating both empirical CDFs at every pooled point.
pub fn ks_brute(a: &[f64], b: &[f64]) -> f64 {
    let ecdf = |s: &[f64], x: f64| s.iter().filter(|&&v| v <= x).count() as f64 / s.len() as f64;
    a.iter().chain(b).map(|&x| (ecdf(a, x) - ecdf(b, x)).abs()).fold(0.0, f64::max)
}

pub fn ks_max_pairwise(groups: &[Vec<f64>]) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..groups.len() {
        for j in i + 1..groups.len() {
            best = best.max(ks_brute(&groups[i], &groups[j]));
        }
    }
    best
}

/// Moore–Penrose pseudo-inverse of a symmetric PSD matrix through its eigendecomposition.
pub fn pinv_sym(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let eig = a.clone().symmetric_eigen();
    let mut inv = DMatrix::zeros(a.nrows(), a.ncols());
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam > tol {
            let v = eig.eigenvectors.column(j);
            inv += v * v.transpose() / lam;
        }
    }
    inv
}

/// Diagonal of the hat matrix `X (XᵀX)⁺ Xᵀ`.
pub fn hat_diagonal(x: &DMatrix<f64>) -> Vec<f64> {
    let xtx = x.transpose() * x;
    let h = x * pinv_sym(&xtx, 1e-9) * x.transpose();
    (0..x.nrows()).map(|i| h[(i, i)]).collect()
}

/// Minimum-norm least squares through the normal equations.
pub fn normal_equations(x: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    let yv = nalgebra::DVector::from_column_slice(y);
    let beta = pinv_sym(&(x.transpose() * x), 1e-9) * x.transpose() * yv;
    beta.iter().copied().collect()
}
