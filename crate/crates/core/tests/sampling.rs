use mverse_core::model::{encode_one_hot, DecisionSpace, Decision, OptionDef};
use mverse_core::sampler::{inclusion_probability_round, leverage_scores, plan_round_robin, plan_sketching, plan_uniform};
use mverse_core::stats::{arithmetic_mean, weighted_mean, weighted_mean_with, MeanEstimator, OutcomeSample};
use mverse_core::synth::{generate, preset, Preset};
use mverse_core::{build_plan, SamplerKind, SamplerOptions, Universe};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn space_from(cards: &[usize], rules: &[Vec<(usize, usize)>]) -> DecisionSpace {
    let decisions = cards
        .iter()
        .enumerate()
        .map(|(d, &k)| Decision {
            name: format!("D{d}"),
            options: (0..k).map(|o| OptionDef { name: format!("o{o}") }).collect(),
        })
        .collect();
    let mut space = DecisionSpace::new("p", decisions, Vec::new(), None).unwrap();
    for r in rules {
        let names: Vec<(String, String)> = r.iter().map(|&(d, o)| (format!("D{d}"), format!("o{o}"))).collect();
        if let Ok(rule) = space.rule_from_names(names.iter().map(|(a, b)| (a.as_str(), b.as_str()))) {
            space.rules.push(rule);
        }
    }
    space
}

fn arb_space() -> impl Strategy<Value = (Vec<usize>, Vec<Vec<(usize, usize)>>)> {
    prop::collection::vec(2usize..4, 2..4).prop_flat_map(|cards| {
        let m = cards.len();
        let c2 = cards.clone();
        let rule = (0..m, 0..m, 0usize..3, 0usize..3).prop_map(move |(a, b, oa, ob)| {
            let b = if a == b { (b + 1) % m } else { b };
            vec![(a, oa % c2[a]), (b, ob % c2[b])]
        });
        (Just(cards), prop::collection::vec(rule, 0..3))
    })
}

fn is_permutation(order: &[usize], n: usize) -> bool {
    let mut seen = vec![false; n];
    order.len() == n && order.iter().all(|&i| i < n && !std::mem::replace(&mut seen[i], true))
}

proptest! {
    #[test]
    fn plans_are_permutations((cards, rules) in arb_space(), seed in any::<u64>()) {
        let space = space_from(&cards, &rules);
        let Ok(u) = space.enumerate_universes() else { return Ok(()) };
        for kind in SamplerKind::ALL {
            let Ok(plan) = build_plan(kind, &space, &u, seed, SamplerOptions::default()) else { continue };
            prop_assert!(is_permutation(&plan.order, u.len()));
            prop_assert_eq!(plan.g.len(), u.len());
            prop_assert!(plan.g.iter().all(|&g| g > 0.0 && g <= 1.0));
            let again = build_plan(kind, &space, &u, seed, SamplerOptions::default()).unwrap();
            prop_assert_eq!(&plan.order, &again.order);
        }
    }

    #[test]
    fn strata_partition_universes((cards, rules) in arb_space()) {
        let space = space_from(&cards, &rules);
        let Ok(u) = space.enumerate_universes() else { return Ok(()) };
        let sizes = space.stratum_sizes(&u);
        let x = encode_one_hot(&space, &u);
        for (d, dec) in space.decisions.iter().enumerate() {
            prop_assert_eq!(sizes[d].iter().sum::<usize>(), u.len());
            for o in 0..dec.cardinality() {
                let col = x.column(d, o).unwrap();
                prop_assert_eq!(x.matrix.column(col).sum() as usize, sizes[d][o]);
            }
        }
        for r in 0..x.rows() {
            prop_assert_eq!(x.matrix.row(r).sum() as usize, space.m());
        }
        let again = space.enumerate_universes().unwrap();
        prop_assert_eq!(u, again);
    }

    #[test]
    fn round_robin_first_round_covers_each_option_once((cards, rules) in arb_space(), seed in any::<u64>()) {
        let space = space_from(&cards, &rules);
        let Ok(u) = space.enumerate_universes() else { return Ok(()) };
        let plan = plan_round_robin(&space, &u, seed);
        let sizes = space.stratum_sizes(&u);
        let nonempty: usize = sizes.iter().flatten().filter(|&&s| s > 0).count();
        let first = nonempty.min(u.len());
        // Every nonempty stratum is hit within the first round.
        let head: Vec<&Universe> = plan.order[..first].iter().map(|&i| &u[i]).collect();
        for (d, row) in sizes.iter().enumerate() {
            for (o, &s) in row.iter().enumerate() {
                if s > 0 {
                    prop_assert!(head.iter().any(|x| x.options[d] == o));
                }
            }
        }
    }

    #[test]
    fn inclusion_probability_is_monotone(sizes in prop::collection::vec(1usize..30, 1..6), j in 0usize..6) {
        let p = inclusion_probability_round(&sizes);
        prop_assert!(p > 0.0 && p <= 1.0);
        let mut bigger = sizes.clone();
        let j = j % sizes.len();
        bigger[j] += 1;
        prop_assert!(inclusion_probability_round(&bigger) <= p);
    }

    #[test]
    fn weighted_mean_uniform_equals_arithmetic(ys in prop::collection::vec(-1e3f64..1e3, 1..50)) {
        let n = ys.len() * 2;
        let samples: Vec<OutcomeSample> =
            ys.iter().enumerate().map(|(i, &y)| OutcomeSample { universe_id: i * 2, y, g: 1.0 / n as f64 }).collect();
        prop_assert_eq!(weighted_mean(&samples, n).unwrap(), arithmetic_mean(&samples).unwrap());
    }
}

#[test]
fn inclusion_probability_series_examples() {
    assert_eq!(inclusion_probability_round(&[4]), 0.25);
    assert!((inclusion_probability_round(&[2, 4]) - 0.625).abs() < 1e-15);
    assert_eq!(inclusion_probability_round(&[1, 7, 9]), 1.0);
}

#[test]
fn inclusion_probability_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let sizes: Vec<usize> = (0..rng.gen_range(1..5)).map(|_| rng.gen_range(1..8)).collect();
        let trials = 100_000;
        let hits = (0..trials).filter(|_| sizes.iter().any(|&s| rng.gen_range(0..s) == 0)).count();
        let freq = hits as f64 / trials as f64;
        assert!((freq - inclusion_probability_round(&sizes)).abs() < 0.01, "{sizes:?}");
    }
}

#[test]
fn uniform_first_draw_frequency() {
    let mut counts = [0usize; 3];
    for seed in 0..10_000 {
        counts[plan_uniform(3, seed).order[0]] += 1;
    }
    for c in counts {
        assert!((c as f64 / 10_000.0 - 1.0 / 3.0).abs() < 0.02);
    }
}

#[test]
fn sketching_first_draw_follows_leverage() {
    let space = space_from(&[2, 3], &[vec![(0, 0), (1, 0)], vec![(0, 0), (1, 1)]]);
    let u = space.enumerate_universes().unwrap();
    let x = encode_one_hot(&space, &u);
    let lev = leverage_scores(&x);
    let total: f64 = lev.l.iter().sum();
    let mut counts = vec![0usize; u.len()];
    for seed in 0..10_000 {
        counts[plan_sketching(&x, seed).unwrap().order[0]] += 1;
    }
    for (c, l) in counts.iter().zip(&lev.l) {
        assert!((*c as f64 / 10_000.0 - l / total).abs() < 0.02);
    }
}

#[test]
fn zero_leverage_rows_come_last() {
    // Third column is never set, the second row is all zero.
    let x = mverse_core::EncodedDesign {
        matrix: DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]),
        columns: Vec::new(),
    };
    let lev = leverage_scores(&x);
    assert_eq!(lev.l[1], 0.0);
    for seed in 0..200 {
        assert_eq!(plan_sketching(&x, seed).unwrap().order[2], 1);
    }
}

fn centring_z_scores(estimator: MeanEstimator, seeds: u64) -> (usize, Vec<f64>) {
    let mv = generate(&preset(Preset::D4), 3).unwrap();
    let n = mv.n();
    let mu = mv.full_mean();
    let mut sum = vec![0.0; n];
    let mut sumsq = vec![0.0; n];
    for seed in 0..seeds {
        let plan = plan_round_robin(&mv.space, &mv.universes, seed);
        let (mut num, mut den) = (0.0, 0.0);
        for (i, (&id, &g)) in plan.order.iter().zip(&plan.g).enumerate() {
            let w = (1.0 / n as f64) / g;
            num += w * mv.outcomes[id];
            den += match estimator {
                MeanEstimator::LikelihoodRatio => 1.0,
                MeanEstimator::SelfNormalized => w,
            };
            let est = num / den;
            sum[i] += est;
            sumsq[i] += est * est;
        }
    }
    let s = seeds as f64;
    let z = (0..n - 1)
        .map(|i| {
            let mean = sum[i] / s;
            let se = ((sumsq[i] / s - mean * mean).max(0.0) / s).sqrt();
            (mean - mu) / se
        })
        .collect();
    (mv.space.total_options(), z)
}

/// Self-normalized round-robin estimates stay centred on the realized mean while the
/// rare option is still being oversampled.
#[test]
fn round_robin_self_normalized_mean_is_centred_early() {
    let (b, z) = centring_z_scores(MeanEstimator::SelfNormalized, 200);
    let end = z.len() / 5;
    let worst = z[b..end].iter().fold(0.0f64, |w, v| w.max(v.abs()));
    assert!(worst < 3.0, "largest deviation {worst} standard errors");
}

/// The direct estimator divides by |T| with round-level inclusion probabilities as
/// densities, which do not sum to one over the population; it is not centred.
#[test]
#[ignore = "documents a known scale mismatch of the direct estimator under round robin"]
fn round_robin_direct_mean_is_centred() {
    let (b, z) = centring_z_scores(MeanEstimator::LikelihoodRatio, 200);
    let worst = z[b..].iter().fold(0.0f64, |w, v| w.max(v.abs()));
    assert!(worst < 3.0, "largest deviation {worst} standard errors");
}

#[test]
fn full_plan_weighted_means_are_finite() {
    let mv = generate(&preset(Preset::D4), 3).unwrap();
    let plan = plan_round_robin(&mv.space, &mv.universes, 0);
    let samples: Vec<OutcomeSample> = plan
        .order
        .iter()
        .zip(&plan.g)
        .map(|(&id, &g)| OutcomeSample { universe_id: id, y: mv.outcomes[id], g })
        .collect();
    for est in [MeanEstimator::LikelihoodRatio, MeanEstimator::SelfNormalized] {
        assert!(weighted_mean_with(&samples, mv.n(), est).unwrap().is_finite());
    }
}
