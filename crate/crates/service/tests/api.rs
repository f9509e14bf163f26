use std::sync::Arc;
use std::time::Duration;

use futures::StreamExt;
use mverse_client::wire::EdgeKind;
use mverse_client::{Client, ClientError};
use mverse_core::sampler::plan_round_robin;
use mverse_core::stats::sensitivity::sensitivity_report;
use mverse_core::{parse_manifest, SensitivityMethod, Universe};
use mverse_runner::exec::ExecFuture;
use mverse_runner::snapshot::outcome_samples;
use mverse_runner::{Action, Execution, Executor, Phase, RunSetup, Runner, RunnerConfig, Severity, Status};
use mverse_service::{serve, AppState};
use tokio::net::TcpListener;

const MANIFEST: &str = r#"{
  "name": "fixture",
  "decisions": [
    {"name": "filter", "options": ["none", "strict", "loose"]},
    {"name": "model", "options": ["ols", "robust"]},
    {"name": "scale", "options": ["raw", "log"]}
  ],
  "constraints": [{"exclude": {"filter": "strict", "model": "robust"}}]
}"#;

/// Outcome driven by `filter`; universe 0 carries quality data, ids 1 and 2 warn,
/// id 3 fails.
struct Scripted {
    delay_ms: u64,
}

impl Executor for Scripted {
    fn execute(&self, u: &Universe) -> ExecFuture {
        let (id, f) = (u.id, u.options[0]);
        let delay = self.delay_ms;
        Box::pin(async move {
            tokio::time::sleep(Duration::from_millis(delay)).await;
            let y = [0.0, 10.0, 20.0][f] + id as f64 * 0.01;
            match id {
                0 => {
                    let data: Vec<f64> = (0..100).map(f64::from).collect();
                    let line = serde_json::json!({"outcome": y, "quality": 0.9, "observed": data, "predicted": data});
                    Execution::from_output(Some(0), &line.to_string(), "", 0.001)
                }
                1 | 2 => Execution::from_output(Some(0), &format!("{{\"outcome\": {y}}}"), &format!("UserWarning: {id} iterations"), 0.001),
                3 => Execution::from_output(Some(1), "", "Traceback (most recent call last):\n  File \"x.py\", line 3\nValueError: bad", 0.001),
                _ => Execution::from_output(Some(0), &format!("{{\"outcome\": {y}}}"), "", 0.001),
            }
        })
    }
}

struct Server {
    client: Client,
    runner: Runner,
    _stop: tokio::sync::oneshot::Sender<()>,
}

async fn start(delay_ms: u64) -> Server {
    let space = parse_manifest(MANIFEST).unwrap();
    let universes = space.enumerate_universes().unwrap();
    let plan = plan_round_robin(&space, &universes, 3);
    let setup = RunSetup { space: Arc::new(space), universes: Arc::new(universes), plan: Arc::new(plan) };
    let config = RunnerConfig { workers: 2, snapshot_interval: Duration::from_millis(10), snapshot_min_completions: 2, ..RunnerConfig::default() };
    let runner = Runner::spawn(setup, Arc::new(Scripted { delay_ms }), config).unwrap();
    let (client, stop) = launch(AppState::new(runner.clone())).await;
    Server { client, runner, _stop: stop }
}

async fn launch(state: AppState) -> (Client, tokio::sync::oneshot::Sender<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    tokio::spawn(serve(listener, state, async {
        let _ = rx.await;
    }));
    (Client::new(format!("http://{addr}")), tx)
}

async fn finish(s: &Server) {
    s.client.control(Action::Start).await.unwrap();
    tokio::time::timeout(
        Duration::from_secs(20),
        s.runner.wait_for(|v| v.state.phase == Phase::Completed && v.latest_snapshot().map(|x| x.completed) == Some(v.state.total)),
    )
    .await
    .unwrap();
}

#[tokio::test]
async fn version_lists_every_endpoint() {
    let s = start(0).await;
    let v = s.client.version().await.unwrap();
    assert_eq!(v.api_version, 1);
    for path in ["/api/space", "/api/control", "/api/progress", "/api/universes", "/api/messages", "/api/events"] {
        assert!(v.endpoints.iter().any(|e| e.path == path), "{path}");
    }
}

#[tokio::test]
async fn no_manifest_gives_conflict() {
    let (client, _stop) = launch(AppState::empty()).await;
    assert!(matches!(client.space().await, Err(ClientError::Conflict(_))));
    assert!(matches!(client.control(Action::Start).await, Err(ClientError::Conflict(_))));
    assert!(client.version().await.is_ok());
}

#[tokio::test]
async fn space_before_run_has_null_sensitivity() {
    let s = start(0).await;
    let doc = s.client.space().await.unwrap();
    let names: Vec<&str> = doc.decisions.iter().map(|d| d.name.as_str()).collect();
    assert_eq!(names, ["filter", "model", "scale"]);
    assert_eq!(doc.decisions[0].options, ["none", "strict", "loose"]);
    assert!(doc.decisions.iter().all(|d| d.sensitivity.is_none()));
    assert_eq!(doc.total_universes, 10);
    assert_eq!(doc.sampler, "round_robin");
    assert_eq!(doc.rules.len(), 1);
    let deps: Vec<_> = doc.edges.iter().filter(|e| e.kind == EdgeKind::Dependency).collect();
    assert_eq!(deps.len(), 1);
    assert_eq!((deps[0].from.as_str(), deps[0].to.as_str()), ("filter", "model"));
    assert!(s.client.progress().await.unwrap().is_empty());
}

#[tokio::test]
async fn control_transitions_and_conflicts() {
    let s = start(30).await;
    let st = s.client.control(Action::Start).await.unwrap();
    assert_eq!(st.state.phase, Phase::Running);
    assert_eq!(st.allowed_actions, vec![Action::Pause]);
    assert!(matches!(s.client.control(Action::Resume).await, Err(ClientError::Conflict(_))));
    s.client.control(Action::Pause).await.unwrap();
    assert!(matches!(s.client.control(Action::Pause).await, Err(ClientError::Conflict(_))));
    s.runner.wait_until_settled().await;
    let st = s.client.control(Action::Reset).await.unwrap();
    assert_eq!((st.state.phase, st.state.completed), (Phase::Idle, 0));
    assert!(s.client.universes(None).await.unwrap().is_empty());
    assert!(s.client.progress().await.unwrap().is_empty());
}

#[tokio::test]
async fn malformed_control_is_a_bad_request() {
    let s = start(0).await;
    let resp = reqwest::Client::new()
        .post(format!("{}/api/control", s.client.base_url()))
        .json(&serde_json::json!({"action": "explode"}))
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), 400);
}

#[tokio::test]
async fn completed_run_is_consistent_across_endpoints() {
    let s = start(2).await;
    let mut lengths = Vec::new();
    s.client.control(Action::Start).await.unwrap();
    loop {
        let p = s.client.progress().await.unwrap();
        lengths.push(p.len());
        let st = s.client.state().await.unwrap();
        if st.state.phase == Phase::Completed && p.last().map(|x| x.completed) == Some(st.state.total) {
            break;
        }
        tokio::time::sleep(Duration::from_millis(5)).await;
    }
    assert!(lengths.windows(2).all(|w| w[0] <= w[1]));

    let st = s.client.state().await.unwrap();
    let progress = s.client.progress().await.unwrap();
    let last = progress.last().unwrap();
    assert_eq!((last.completed, last.failed, last.total), (st.state.completed, st.state.failed, st.state.total));

    let space = s.client.space().await.unwrap();
    let view = s.runner.view();
    let samples = outcome_samples(view.results.iter().map(|r| r.as_ref()));
    let setup = s.runner.setup();
    let offline = sensitivity_report(&setup.space, &setup.universes, &samples, SensitivityMethod::Ad);
    for (d, o) in space.decisions.iter().zip(&offline) {
        assert_eq!(d.sensitivity.as_ref().unwrap().score, o.score, "{}", d.name);
    }
    assert_eq!(s.client.sensitivity().await.unwrap().len(), 3);
}

#[tokio::test]
async fn universes_include_failures_and_decision_options() {
    let s = start(0).await;
    finish(&s).await;
    let all = s.client.universes(None).await.unwrap();
    assert_eq!(all.len(), 10);
    assert!(all.iter().all(|r| r.option.is_none()));
    let failed = all.iter().find(|r| r.id == 3).unwrap();
    assert_eq!((failed.status, failed.outcome), (Status::Error, None));
    let split = s.client.universes(Some("filter")).await.unwrap();
    for r in &split {
        assert_eq!(r.option.as_deref(), Some(r.assignment["filter"].as_str()));
    }
    assert!(matches!(s.client.universes(Some("nope")).await, Err(ClientError::NotFound(_))));
}

#[tokio::test]
async fn messages_aggregate_and_filter() {
    let s = start(0).await;
    finish(&s).await;
    let all = s.client.messages(None).await.unwrap();
    assert_eq!(all.len(), 2);
    assert_eq!(all[0].severity, Severity::Error);
    assert_eq!(all[0].normalized_text, "ValueError: bad");
    assert_eq!(all[1].severity, Severity::Warning);
    assert_eq!(all[1].normalized_text, "UserWarning: <N> iterations");
    assert_eq!(all[1].count, 2);
    assert!(s.client.messages(Some(&[5])).await.unwrap().is_empty());
    let picked = s.client.messages(Some(&[2, 3])).await.unwrap();
    assert_eq!(picked.iter().map(|m| m.severity).collect::<Vec<_>>(), vec![Severity::Error, Severity::Warning]);
    assert_eq!(picked[1].universe_ids.iter().copied().collect::<Vec<_>>(), vec![2]);
}

#[tokio::test]
async fn quality_endpoint() {
    let s = start(0).await;
    finish(&s).await;
    let q = s.client.quality(0).await.unwrap();
    assert_eq!(q.observed.len(), 100);
    assert!(q.quantile_dots.observed.len() <= 100);
    assert_eq!(q.summary.observed, q.summary.predicted);
    assert_eq!(q.quantile_dots.observed, q.quantile_dots.predicted);
    assert!(matches!(s.client.quality(5).await, Err(ClientError::NotFound(_))));
    assert!(matches!(s.client.quality(999).await, Err(ClientError::NotFound(_))));
}

#[tokio::test]
async fn event_stream_starts_with_state_and_counts_completions() {
    let s = start(5).await;
    let mut events = Box::pin(s.client.events().await.unwrap());
    let first = events.next().await.unwrap().unwrap();
    assert_eq!(first.kind, "state_changed");
    assert_eq!(first.payload["phase"], "idle");
    let mut seqs = vec![first.seq];
    let mut completed = 0;
    let mut snapshots = 0;
    s.client.control(Action::Start).await.unwrap();
    loop {
        let ev = tokio::time::timeout(Duration::from_secs(20), events.next()).await.unwrap().unwrap().unwrap();
        seqs.push(ev.seq);
        match ev.kind.as_str() {
            "universe_completed" => completed += 1,
            "snapshot" => {
                snapshots += 1;
                if ev.payload["completed"] == 10 {
                    break;
                }
            }
            "state_changed" => {}
            other => panic!("unexpected event {other}"),
        }
    }
    assert_eq!(completed, 10);
    assert!(snapshots >= 1);
    assert!(seqs.windows(2).all(|w| w[0] < w[1]), "{seqs:?}");
}
