use std::path::PathBuf;
use std::sync::Arc;

use clap::{ArgGroup, Args};
use mverse_client::Client;
use mverse_core::stats::ConfidenceInterval;
use mverse_core::{DecisionSpace, SensitivityScore};
use mverse_runner::log::{read_jsonl, RESULTS_FILE};
use mverse_runner::{aggregate_messages, compute_snapshot, AggregatedMessage, UniverseResult};
use serde::Serialize;

use crate::error::{usage, CliResult, Context};
use crate::output::{print_report, write_sensitivity};
use crate::session::RunMeta;

#[derive(Debug, Clone, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["url", "dir"])))]
pub struct ReportArgs {
    /// Base URL of a running `mverse serve`.
    #[arg(long)]
    pub url: Option<String>,
    /// Output directory of a previous run, read offline.
    #[arg(long)]
    pub dir: Option<PathBuf>,
    /// Also write the ranked sensitivity table here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Serialize)]
struct Report {
    completed: usize,
    failed: usize,
    total: usize,
    mean: Option<f64>,
    mean_ci: Option<ConfidenceInterval>,
    sensitivity: Vec<SensitivityScore>,
    messages: Vec<AggregatedMessage>,
}

async fn live(url: &str) -> CliResult<Report> {
    let client = Client::new(url);
    let state = client.state().await.runtime_ctx(format!("contacting {url}"))?;
    let progress = client.progress().await.runtime_ctx("reading progress")?;
    let last = progress.last();
    Ok(Report {
        completed: state.state.completed,
        failed: state.state.failed,
        total: state.state.total,
        mean: last.and_then(|s| s.mean),
        mean_ci: last.and_then(|s| s.mean_ci),
        sensitivity: client.sensitivity().await.runtime_ctx("reading sensitivity")?,
        messages: client.messages(None).await.runtime_ctx("reading messages")?,
    })
}

/// Recomputes the statistics from the result log with the run's own settings.
fn offline(dir: &std::path::Path) -> CliResult<Report> {
    let meta = RunMeta::read(dir)?.ok_or_else(|| usage(format!("{} has no run.json", dir.display())))?;
    let space = DecisionSpace::from_manifest(&meta.identity.manifest).usage_ctx("run.json manifest")?;
    let universes = space.enumerate_universes().usage_ctx("enumerating universes")?;
    let logged: Vec<UniverseResult> = read_jsonl(dir.join(RESULTS_FILE)).usage_ctx("reading the result log")?;
    if let Some(r) = logged.iter().find(|r| r.universe_id >= universes.len()) {
        return Err(usage(format!("result log names universe {} outside the space", r.universe_id)));
    }
    let results: Vec<Arc<UniverseResult>> = logged.into_iter().map(Arc::new).collect();
    let t = results.iter().map(|r| r.completed_at).fold(0.0, f64::max);
    let snap = compute_snapshot(&space, &universes, &results, &meta.stats, t, None);
    Ok(Report {
        completed: snap.completed,
        failed: snap.failed,
        total: snap.total,
        mean: snap.mean,
        mean_ci: snap.mean_ci,
        sensitivity: snap.sensitivity,
        messages: aggregate_messages(results.iter().map(|r| r.as_ref())),
    })
}

pub async fn report(args: ReportArgs) -> CliResult {
    let rep = match (&args.url, &args.dir) {
        (Some(url), None) => live(url).await?,
        (None, Some(dir)) => offline(dir)?,
        _ => return Err(usage("give exactly one of --url or --dir")),
    };
    if let Some(path) = &args.csv {
        write_sensitivity(path, &rep.sensitivity)?;
    }
    if args.json {
        println!("{}", serde_json::to_string_pretty(&rep).runtime_ctx("serializing report")?);
    } else {
        print_report(rep.completed, rep.failed, rep.total, rep.mean, rep.mean_ci.as_ref(), &rep.sensitivity, &rep.messages);
    }
    Ok(())
}
