//! Shared setup for `run` and `serve`: manifest, plan, output directory and an
//! in-process service the command talks to through the client.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::Args;
use mverse_client::Client;
use mverse_core::stats::MeanEstimator;
use mverse_core::{build_plan, parse_manifest, Manifest, SamplerKind, SamplerOptions, SensitivityMethod};
use mverse_runner::{CommandExecutor, ExecConfig, RunSetup, Runner, RunnerConfig, StatsConfig};
use mverse_service::{serve, AppState};
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use tokio::sync::oneshot;

use crate::error::{usage, CliResult, Context};

pub const META_FILE: &str = "run.json";
pub const PLAN_FILE: &str = "plan.csv";

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Multiverse manifest (JSON).
    pub manifest: PathBuf,
    #[arg(long, default_value = "round_robin")]
    pub sampler: SamplerKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Parallel universes; defaults to logical cores minus one.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Per-universe wall-clock limit in seconds.
    #[arg(long, default_value_t = 600.0)]
    pub timeout: f64,
    /// Output directory. An existing run here with the same settings is resumed.
    #[arg(long, default_value = "mverse-out")]
    pub out: PathBuf,
    #[arg(long, default_value = "ad")]
    pub method: SensitivityMethod,
    /// Mean estimator for live snapshots: likelihood_ratio or self_normalized.
    #[arg(long, default_value = "likelihood_ratio", value_parser = parse_estimator)]
    pub estimator: MeanEstimator,
    /// Add pairwise interaction columns to the sketching design.
    #[arg(long)]
    pub interactions: bool,
}

pub fn parse_estimator(s: &str) -> Result<MeanEstimator, String> {
    match s {
        "likelihood_ratio" | "lr" => Ok(MeanEstimator::LikelihoodRatio),
        "self_normalized" | "sn" => Ok(MeanEstimator::SelfNormalized),
        other => Err(format!("unknown estimator {other:?} (expected likelihood_ratio or self_normalized)")),
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get().saturating_sub(1)).unwrap_or(1).max(1)
}

/// Settings that must match for a run directory to be resumed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunIdentity {
    pub manifest: Manifest,
    pub sampler: SamplerKind,
    pub seed: u64,
    pub interactions: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMeta {
    pub tool_version: String,
    #[serde(flatten)]
    pub identity: RunIdentity,
    pub workers: usize,
    pub timeout_seconds: f64,
    pub stats: StatsConfig,
    pub total: usize,
    pub status: String,
    pub completed: usize,
    pub failed: usize,
    pub mean: Option<f64>,
    pub mean_ci: Option<mverse_core::stats::ConfidenceInterval>,
}

impl RunMeta {
    pub fn write(&self, dir: &Path) -> CliResult {
        let text = serde_json::to_string_pretty(self).runtime_ctx("serializing run metadata")?;
        fs::write(dir.join(META_FILE), text + "\n").runtime_ctx(format!("writing {}", dir.join(META_FILE).display()))
    }

    pub fn read(dir: &Path) -> CliResult<Option<RunMeta>> {
        let path = dir.join(META_FILE);
        match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).usage_ctx(format!("reading {}", path.display())).map(Some),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(usage(format!("reading {}: {e}", path.display()))),
        }
    }
}

pub struct Session {
    pub runner: Runner,
    pub meta: RunMeta,
    pub out: PathBuf,
}

pub fn load_manifest(path: &Path) -> CliResult<mverse_core::DecisionSpace> {
    let text = fs::read_to_string(path).usage_ctx(format!("reading manifest {}", path.display()))?;
    parse_manifest(&text).usage_ctx(format!("manifest {}", path.display()))
}

/// Builds the plan, checks the output directory and spawns the coordinator.
pub fn open(args: &RunArgs) -> CliResult<Session> {
    let space = load_manifest(&args.manifest)?;
    let universes = space.enumerate_universes().usage_ctx("enumerating universes")?;
    if universes.is_empty() {
        return Err(usage("the manifest's exclusion rules leave no valid universe"));
    }
    if space.command.is_none() {
        return Err(usage("the manifest has no \"command\" template"));
    }
    if !(args.timeout > 0.0) {
        return Err(usage("--timeout must be positive"));
    }
    let workers = args.workers.unwrap_or_else(default_workers);
    if workers == 0 {
        return Err(usage("--workers must be at least 1"));
    }
    let options = SamplerOptions { interactions: args.interactions };
    let plan = build_plan(args.sampler, &space, &universes, args.seed, options).usage_ctx("building the sampling plan")?;
    let identity = RunIdentity { manifest: space.to_manifest(), sampler: args.sampler, seed: args.seed, interactions: args.interactions };

    fs::create_dir_all(&args.out).runtime_ctx(format!("creating {}", args.out.display()))?;
    if let Some(previous) = RunMeta::read(&args.out)? {
        if previous.identity != identity {
            return Err(usage(format!(
                "{} holds a run with a different manifest, sampler or seed; choose another --out",
                args.out.display()
            )));
        }
    }
    let mut file = fs::File::create(args.out.join(PLAN_FILE)).runtime_ctx("writing plan")?;
    plan.write_csv(&mut file).runtime_ctx("writing plan")?;

    let stats = StatsConfig { method: args.method, estimator: args.estimator, seed: args.seed, ..StatsConfig::default() };
    let meta = RunMeta {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        identity,
        workers,
        timeout_seconds: args.timeout,
        stats,
        total: universes.len(),
        status: "idle".into(),
        completed: 0,
        failed: 0,
        mean: None,
        mean_ci: None,
    };
    meta.write(&args.out)?;

    let workdir = args
        .manifest
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let space = Arc::new(space);
    let exec = CommandExecutor::new(
        space.clone(),
        ExecConfig { timeout: Duration::from_secs_f64(args.timeout), workdir, ..ExecConfig::default() },
    );
    let setup = RunSetup { space, universes: Arc::new(universes), plan: Arc::new(plan) };
    let config = RunnerConfig { workers, stats, log_dir: Some(args.out.clone()), ..RunnerConfig::default() };
    let runner = Runner::spawn(setup, Arc::new(exec), config).runtime_ctx("opening the run log")?;
    Ok(Session { runner, meta, out: args.out.clone() })
}

pub struct Hosted {
    pub client: Client,
    pub addr: std::net::SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    task: tokio::task::JoinHandle<std::io::Result<()>>,
}

impl Hosted {
    /// Stops accepting connections; open event streams are cut after a grace period.
    pub async fn shutdown(mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        let abort = self.task.abort_handle();
        if tokio::time::timeout(Duration::from_secs(2), &mut self.task).await.is_err() {
            abort.abort();
        }
    }
}

/// Serves `state` on `listener` in the background.
pub fn host(listener: TcpListener, state: AppState) -> std::io::Result<Hosted> {
    let addr = listener.local_addr()?;
    let (tx, rx) = oneshot::channel::<()>();
    let task = tokio::spawn(serve(listener, state, async {
        let _ = rx.await;
    }));
    Ok(Hosted { client: Client::new(format!("http://{addr}")), addr, stop: Some(tx), task })
}
