use mverse_core::stats::{bootstrap_ci_bca, BootstrapConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use rayon::prelude::*;

fn mean(xs: &[f64]) -> Option<f64> {
    Some(xs.iter().sum::<f64>() / xs.len() as f64)
}

fn coverage<D: Distribution<f64> + Sync>(dist: &D, truth: f64, trials: u64, size: usize) -> f64 {
    let hits = (0..trials)
        .into_par_iter()
        .filter(|&t| {
            let mut rng = ChaCha8Rng::seed_from_u64(t);
            let data: Vec<f64> = (0..size).map(|_| dist.sample(&mut rng)).collect();
            let cfg = BootstrapConfig { resamples: 1000, seed: t, level: 0.95 };
            let ci = bootstrap_ci_bca(&data, mean, cfg).unwrap().ci;
            ci.lo <= truth && truth <= ci.hi
        })
        .count();
    hits as f64 / trials as f64
}

#[test]
fn normal_mean_coverage() {
    let c = coverage(&Normal::new(0.0, 1.0).unwrap(), 0.0, 200, 50);
    assert!((0.90..=0.98).contains(&c), "coverage {c}");
}

#[test]
fn lognormal_mean_coverage() {
    let c = coverage(&LogNormal::new(0.0, 0.5).unwrap(), (0.125f64).exp(), 200, 80);
    assert!((0.88..=0.98).contains(&c), "coverage {c}");
}

#[test]
fn standard_normal_interval_width() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let data: Vec<f64> = (0..1000).map(|_| Normal::new(0.0, 1.0).unwrap().sample(&mut rng)).collect();
    let r = bootstrap_ci_bca(&data, mean, BootstrapConfig::offline(1)).unwrap();
    let width = r.ci.hi - r.ci.lo;
    let expected = 2.0 * 1.96 / 1000f64.sqrt();
    assert!((width / expected - 1.0).abs() < 0.2, "width {width}");
    let centre = (r.ci.hi + r.ci.lo) / 2.0;
    assert!((centre - r.estimate).abs() < 0.2 * expected);
}

#[test]
fn deterministic_given_seed() {
    let data: Vec<f64> = (0..40).map(|i| (i as f64).sin()).collect();
    let a = bootstrap_ci_bca(&data, mean, BootstrapConfig::live(3)).unwrap();
    let b = bootstrap_ci_bca(&data, mean, BootstrapConfig::live(3)).unwrap();
    assert_eq!(a, b);
}
