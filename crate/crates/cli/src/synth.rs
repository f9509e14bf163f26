use std::fs;
use std::path::PathBuf;

use clap::Args;
use mverse_core::synth::{generate, preset, Preset};
use serde::Serialize;

use crate::error::{CliResult, Context};
use crate::output::write_json;

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// One of D1..D5.
    #[arg(long)]
    pub preset: Preset,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV; the ground truth goes next to it as `<stem>.truth.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct Sidecar {
    preset: Preset,
    seed: u64,
    universes: usize,
    decisions: Vec<(String, usize)>,
    sensitive: Vec<String>,
    ranking: Vec<String>,
    true_mean: f64,
    full_mean: f64,
}

pub fn sidecar_path(out: &std::path::Path) -> PathBuf {
    out.with_extension("truth.json")
}

pub fn synth(args: SynthArgs) -> CliResult {
    let mv = generate(&preset(args.preset), args.seed).usage_ctx(format!("preset {}", args.preset))?;
    if let Some(dir) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).runtime_ctx(format!("creating {}", dir.display()))?;
    }
    let file = fs::File::create(&args.out).runtime_ctx(format!("writing {}", args.out.display()))?;
    mv.write_table(file).runtime_ctx(format!("writing {}", args.out.display()))?;
    let truth = mv.truth.clone().expect("generated multiverses carry ground truth");
    let sidecar = Sidecar {
        preset: args.preset,
        seed: args.seed,
        universes: mv.n(),
        decisions: mv.space.decisions.iter().map(|d| (d.name.clone(), d.cardinality())).collect(),
        sensitive: truth.sensitive,
        ranking: truth.ranking,
        true_mean: truth.true_mean,
        full_mean: mv.full_mean(),
    };
    let side = sidecar_path(&args.out);
    write_json(&side, &sidecar)?;
    println!("{} universes written to {} (truth in {})", mv.n(), args.out.display(), side.display());
    Ok(())
}
