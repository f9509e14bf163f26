//! `mverse`: run, serve, benchmark and inspect multiverse analyses.

mod bench;
mod error;
mod output;
mod report;
mod run;
mod serve;
mod session;
mod synth;

use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use crate::error::{runtime, CliResult};

#[derive(Debug, Parser)]
#[command(name = "mverse", version, about = "Progressive multiverse analysis")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Execute a manifest's universes headlessly to completion.
    Run(session::RunArgs),
    /// Compare samplers on a synthetic preset or an outcome table.
    Bench(bench::BenchArgs),
    /// Write a synthetic multiverse as an outcome table with its ground truth.
    Synth(synth::SynthArgs),
    /// Host the HTTP API and dashboard for a manifest.
    Serve(serve::ServeArgs),
    /// Summarize a run from its output directory or a running server.
    Report(report::ReportArgs),
}

fn dispatch(cmd: Cmd) -> CliResult {
    match cmd {
        Cmd::Bench(a) => bench::bench(a),
        Cmd::Synth(a) => synth::synth(a),
        cmd => {
            let rt = tokio::runtime::Runtime::new().map_err(|e| runtime(format!("starting the async runtime: {e}")))?;
            rt.block_on(async move {
                match cmd {
                    Cmd::Run(a) => run::run(a).await,
                    Cmd::Serve(a) => serve::serve(a).await,
                    Cmd::Report(a) => report::report(a).await,
                    Cmd::Bench(_) | Cmd::Synth(_) => unreachable!(),
                }
            })
        }
    }
}

fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_env("MVERSE_LOG").unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = dispatch(cli.cmd) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
