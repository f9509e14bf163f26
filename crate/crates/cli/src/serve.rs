use std::path::PathBuf;

use clap::Args;
use mverse_runner::{Action, Phase};
use mverse_service::AppState;
use tokio::net::TcpListener;

use crate::error::{runtime, CliResult, Context};
use crate::session::{host, open, RunArgs};

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Directory of dashboard files to serve at `/`.
    #[arg(long)]
    pub assets: Option<PathBuf>,
    /// Start executing immediately instead of waiting for a control request.
    #[arg(long)]
    pub start: bool,
}

pub async fn serve(args: ServeArgs) -> CliResult {
    let mut session = open(&args.run)?;
    let listener = TcpListener::bind((args.host.as_str(), args.port))
        .await
        .map_err(|e| runtime(format!("cannot listen on {}:{}: {e}", args.host, args.port)))?;
    let mut state = AppState::new(session.runner.clone());
    if let Some(dir) = &args.assets {
        if !dir.is_dir() {
            return Err(crate::error::usage(format!("--assets {} is not a directory", dir.display())));
        }
        state = state.with_assets(dir.clone());
    }
    let hosted = host(listener, state).runtime_ctx("starting the service")?;
    println!("serving {} universes on http://{}", session.meta.total, hosted.addr);
    if args.start {
        hosted.client.control(Action::Start).await.runtime_ctx("starting the run")?;
    }

    tokio::signal::ctrl_c().await.runtime_ctx("waiting for interrupt")?;
    if session.runner.state().phase == Phase::Running {
        eprintln!("pausing; letting in-flight universes finish (interrupt again to abort)");
        let _ = session.runner.control(Action::Pause).await;
        tokio::select! {
            _ = session.runner.wait_until_settled() => {}
            _ = tokio::signal::ctrl_c() => eprintln!("aborting in-flight universes"),
        }
    }
    let view = session.runner.view();
    session.meta.status = view.state.phase.to_string();
    session.meta.completed = view.state.completed;
    session.meta.failed = view.state.failed;
    if let Some(s) = view.latest_snapshot() {
        session.meta.mean = s.mean;
        session.meta.mean_ci = s.mean_ci;
    }
    session.meta.write(&session.out)?;
    hosted.shutdown().await;
    eprintln!("stopped with {} of {} universes logged in {}", view.state.completed, view.state.total, session.out.display());
    Ok(())
}
