use futures::StreamExt;
use mverse_core::stats::MeanEstimator;
use mverse_core::SamplerKind;
use mverse_runner::log::RESULTS_FILE;
use mverse_runner::{Action, Phase, ProgressSnapshot};
use mverse_service::AppState;
use tokio::net::TcpListener;

use crate::error::{runtime, CliResult, Context};
use crate::output::{format_mean, print_report, write_json, write_sensitivity, MESSAGES_FILE, SENSITIVITY_FILE};
use crate::session::{host, open, RunArgs};

pub async fn run(args: RunArgs) -> CliResult {
    let mut session = open(&args)?;
    let listener = TcpListener::bind("127.0.0.1:0").await.runtime_ctx("binding a local port")?;
    let hosted = host(listener, AppState::new(session.runner.clone())).runtime_ctx("starting the service")?;
    let client = hosted.client.clone();

    let mut events = Box::pin(client.events().await.runtime_ctx("subscribing to events")?);
    let total = session.meta.total;
    let mut last_snapshot = client.progress().await.runtime_ctx("reading progress")?.last().map(|s| s.completed);
    let started = client.control(Action::Start).await.runtime_ctx("starting the run")?;
    let mut phase = started.state.phase;
    eprintln!(
        "running {total} universes ({} already logged) with {} workers, sampler {}",
        started.state.completed,
        session.meta.workers,
        session.meta.identity.sampler
    );
    if session.meta.identity.sampler != SamplerKind::Uniform && session.meta.stats.estimator == MeanEstimator::LikelihoodRatio {
        eprintln!("note: the likelihood-ratio mean is not rescaled for this sampler's densities; --estimator self_normalized is");
    }
    session.meta.status = "running".into();
    session.meta.write(&session.out)?;

    let ctrl_c = tokio::signal::ctrl_c();
    tokio::pin!(ctrl_c);
    while !(phase == Phase::Completed && last_snapshot == Some(total)) {
        tokio::select! {
            ev = events.next() => {
                let ev = ev.ok_or_else(|| runtime("event stream closed"))?.runtime_ctx("event stream")?;
                match ev.kind.as_str() {
                    "state_changed" => {
                        if let Some(p) = ev.payload.get("phase").and_then(|p| serde_json::from_value(p.clone()).ok()) {
                            phase = p;
                        }
                    }
                    "snapshot" => {
                        let snap: ProgressSnapshot = serde_json::from_value(ev.payload).runtime_ctx("snapshot event")?;
                        let eta = snap.eta_seconds.map(|e| format!(", eta {e:.0}s")).unwrap_or_default();
                        eprintln!(
                            "[{}/{}] mean {}{}{eta}",
                            snap.completed,
                            snap.total,
                            format_mean(snap.mean, snap.mean_ci.as_ref()),
                            if snap.failed > 0 { format!(", {} failed", snap.failed) } else { String::new() },
                        );
                        last_snapshot = Some(snap.completed);
                    }
                    _ => {}
                }
            }
            _ = &mut ctrl_c => {
                eprintln!("interrupted; letting in-flight universes finish");
                let _ = client.control(Action::Pause).await;
                let view = session.runner.wait_until_settled().await;
                session.meta.status = "paused".into();
                session.meta.completed = view.state.completed;
                session.meta.failed = view.state.failed;
                session.meta.write(&session.out)?;
                drop(events);
                hosted.shutdown().await;
                return Err(runtime(format!(
                    "paused after {} of {total} universes; rerun the same command to resume",
                    view.state.completed
                )));
            }
        }
    }
    drop(events);

    let state = client.state().await.runtime_ctx("reading state")?;
    let progress = client.progress().await.runtime_ctx("reading progress")?;
    let scores = client.sensitivity().await.runtime_ctx("reading sensitivity")?;
    let messages = client.messages(None).await.runtime_ctx("reading messages")?;
    hosted.shutdown().await;

    let last = progress.last();
    write_sensitivity(&session.out.join(SENSITIVITY_FILE), &scores)?;
    write_json(&session.out.join(MESSAGES_FILE), &messages)?;
    session.meta.status = "completed".into();
    session.meta.completed = state.state.completed;
    session.meta.failed = state.state.failed;
    session.meta.mean = last.and_then(|s| s.mean);
    session.meta.mean_ci = last.and_then(|s| s.mean_ci);
    session.meta.write(&session.out)?;

    print_report(
        state.state.completed,
        state.state.failed,
        total,
        session.meta.mean,
        session.meta.mean_ci.as_ref(),
        &scores,
        &messages,
    );
    eprintln!("results in {}", session.out.join(RESULTS_FILE).display());
    if state.state.failed * 2 > total {
        return Err(runtime(format!("{} of {total} universes failed", state.state.failed)));
    }
    Ok(())
}
