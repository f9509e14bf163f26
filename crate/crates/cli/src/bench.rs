use std::fs;
use std::path::PathBuf;

use clap::{ArgGroup, Args};
use mverse_core::eval::{bias_mse_experiment, correlation_trajectory, termination_benchmark, BenchConfig, BenchResult, MseResult};
use mverse_core::stats::MeanEstimator;
use mverse_core::synth::{generate, load_table, preset, GroundTruth, Preset};
use mverse_core::{SamplerKind, SamplerOptions};
use serde::Serialize;

use crate::error::{usage, CliResult, Context};
use crate::output::write_json;
use crate::session::parse_estimator;

#[derive(Debug, Clone, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["preset", "table"])))]
pub struct BenchArgs {
    /// Synthetic preset, D1..D5.
    #[arg(long)]
    pub preset: Option<Preset>,
    /// Precomputed-outcome CSV with one column per decision plus `outcome`.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Samplers to compare; repeat the flag. Defaults to all three.
    #[arg(long = "sampler")]
    pub samplers: Vec<SamplerKind>,
    #[arg(long, default_value_t = 50)]
    pub repeats: usize,
    /// Seed for the sampling plans.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Seed for the preset's outcomes; defaults to --seed.
    #[arg(long)]
    pub data_seed: Option<u64>,
    #[arg(long, default_value = "bench-out")]
    pub out: PathBuf,
    /// Comma-separated decisions whose ranking must be recovered (tables have no ground truth).
    #[arg(long, value_delimiter = ',')]
    pub sensitive: Option<Vec<String>>,
    /// Trajectory checkpoint spacing; defaults to about 100 checkpoints.
    #[arg(long)]
    pub stride: Option<usize>,
    /// Draws ignored by the MSE average; defaults to the total option count.
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Estimator for the corrected mean.
    #[arg(long, default_value = "likelihood_ratio", value_parser = parse_estimator)]
    pub estimator: MeanEstimator,
    #[arg(long)]
    pub interactions: bool,
}

#[derive(Serialize)]
struct BenchDoc<'a> {
    source: String,
    seed: u64,
    data_seed: Option<u64>,
    universes: usize,
    decisions: Vec<(String, usize)>,
    truth: Option<&'a GroundTruth>,
    config: &'a BenchConfig,
    estimator: MeanEstimator,
    termination: &'a [BenchResult],
    mse: &'a [MseResult],
}

pub fn bench(args: BenchArgs) -> CliResult {
    if args.repeats == 0 {
        return Err(usage("--repeats must be at least 1"));
    }
    let (mv, source, data_seed) = match (&args.preset, &args.table) {
        (Some(p), None) => {
            let seed = args.data_seed.unwrap_or(args.seed);
            (generate(&preset(*p), seed).usage_ctx(format!("preset {p}"))?, format!("preset {p}"), Some(seed))
        }
        (None, Some(path)) => {
            let file = fs::File::open(path).usage_ctx(format!("opening {}", path.display()))?;
            (load_table(file).usage_ctx(format!("table {}", path.display()))?, format!("table {}", path.display()), None)
        }
        _ => return Err(usage("give exactly one of --preset or --table")),
    };
    if let Some(names) = &args.sensitive {
        if let Some(bad) = names.iter().find(|n| mv.space.decision_index(n).is_none()) {
            return Err(usage(format!("--sensitive names unknown decision {bad:?}")));
        }
    }
    let samplers = if args.samplers.is_empty() { SamplerKind::ALL.to_vec() } else { args.samplers.clone() };
    let n = mv.n();
    let cfg = BenchConfig {
        repeats: args.repeats,
        burn_in: args.burn_in,
        stride: args.stride.unwrap_or((n / 100).max(1)),
        sampler: SamplerOptions { interactions: args.interactions },
        sensitive: args.sensitive.clone(),
        ..BenchConfig::default()
    };
    fs::create_dir_all(&args.out).runtime_ctx(format!("creating {}", args.out.display()))?;
    eprintln!("{source}: {n} universes, {} repeats", args.repeats);

    let mut termination = Vec::new();
    let mut mse = Vec::new();
    for &kind in &samplers {
        let result = termination_benchmark(&mv, kind, &cfg, args.seed).runtime_ctx(format!("{kind} termination"))?;
        let file = fs::File::create(args.out.join(format!("fractions_{kind}.csv"))).runtime_ctx("writing fractions")?;
        result.write_csv(file).runtime_ctx("writing fractions")?;
        let traj = correlation_trajectory(&mv, kind, &cfg, args.seed).runtime_ctx(format!("{kind} trajectory"))?;
        let file = fs::File::create(args.out.join(format!("trajectory_{kind}.csv"))).runtime_ctx("writing trajectory")?;
        traj.write_csv(file).runtime_ctx("writing trajectory")?;
        for corrected in [true, false] {
            mse.push(
                bias_mse_experiment(&mv, kind, &cfg, args.seed, corrected, args.estimator)
                    .runtime_ctx(format!("{kind} mse"))?,
            );
        }
        termination.push(result);
    }

    let mut wr = csv::Writer::from_path(args.out.join("mse.csv")).runtime_ctx("writing mse.csv")?;
    wr.write_record(["sampler", "corrected", "burn_in", "mse"]).runtime_ctx("writing mse.csv")?;
    for m in &mse {
        wr.write_record([m.sampler.to_string(), m.corrected.to_string(), m.burn_in.to_string(), m.mse.to_string()])
            .runtime_ctx("writing mse.csv")?;
    }
    wr.flush().runtime_ctx("writing mse.csv")?;

    let doc = BenchDoc {
        source,
        seed: args.seed,
        data_seed,
        universes: n,
        decisions: mv.space.decisions.iter().map(|d| (d.name.clone(), d.cardinality())).collect(),
        truth: mv.truth.as_ref(),
        config: &cfg,
        estimator: args.estimator,
        termination: &termination,
        mse: &mse,
    };
    write_json(&args.out.join("bench.json"), &doc)?;

    println!("{:<12} {:>8} {:>8} {:>8} {:>8} {:>12} {:>12}", "sampler", "median", "mean", "q1", "q3", "mse", "mse_raw");
    for (i, r) in termination.iter().enumerate() {
        let s = r.summary;
        println!(
            "{:<12} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>12.6} {:>12.6}",
            r.sampler.as_str(),
            s.median,
            s.mean,
            s.q1,
            s.q3,
            mse[2 * i].mse,
            mse[2 * i + 1].mse
        );
    }
    Ok(())
}
