//! HTTP/JSON front end over a run coordinator, with a server-sent event stream.

pub mod docs;
pub mod quality;

use std::collections::BTreeSet;
use std::convert::Infallible;
use std::future::Future;
use std::path::PathBuf;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::{Stream, StreamExt};
use mverse_client::wire::{ControlRequest, ErrorDoc, QualityDoc, QualitySummary, QuantileDots};
use mverse_runner::{aggregate_messages, ControlError, RunEvent, Runner};
use serde::Deserialize;
use tokio::net::TcpListener;
use tokio_stream::wrappers::BroadcastStream;
use tower_http::services::ServeDir;

use crate::docs::{space_doc, state_doc, universe_record, version_doc};
use crate::quality::{quantile_dots, summarize};

const INDEX_HTML: &str = include_str!("index.html");

#[derive(Clone, Default)]
pub struct AppState {
    runner: Option<Runner>,
    assets: Option<PathBuf>,
}

impl AppState {
    pub fn new(runner: Runner) -> Self {
        AppState { runner: Some(runner), assets: None }
    }

    /// A server with no manifest loaded; run endpoints answer 409.
    pub fn empty() -> Self {
        AppState::default()
    }

    /// Serves dashboard files from `dir` instead of the built-in index page.
    pub fn with_assets(mut self, dir: PathBuf) -> Self {
        self.assets = Some(dir);
        self
    }

    pub fn runner(&self) -> Option<&Runner> {
        self.runner.as_ref()
    }
}

#[derive(Debug)]
pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(ErrorDoc { error: self.1 })).into_response()
    }
}

impl From<ControlError> for ApiError {
    fn from(e: ControlError) -> Self {
        match e {
            ControlError::Illegal { .. } => ApiError(StatusCode::CONFLICT, e.to_string()),
            ControlError::Stopped => ApiError(StatusCode::SERVICE_UNAVAILABLE, e.to_string()),
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn loaded(state: &AppState) -> ApiResult<&Runner> {
    state.runner.as_ref().ok_or_else(|| ApiError(StatusCode::CONFLICT, "no manifest loaded".into()))
}

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/api/version", get(version))
        .route("/api/space", get(space))
        .route("/api/state", get(run_state))
        .route("/api/control", post(control))
        .route("/api/progress", get(progress))
        .route("/api/sensitivity", get(sensitivity))
        .route("/api/universes", get(universes))
        .route("/api/messages", get(messages))
        .route("/api/quality/{universe_id}", get(quality))
        .route("/api/events", get(events));
    let router = match &state.assets {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(|| async { Html(INDEX_HTML) })),
    };
    router.with_state(state)
}

/// Serves until `shutdown` resolves.
pub async fn serve<F>(listener: TcpListener, state: AppState, shutdown: F) -> std::io::Result<()>
where
    F: Future<Output = ()> + Send + 'static,
{
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}

async fn version() -> impl IntoResponse {
    Json(version_doc())
}

async fn space(State(state): State<AppState>) -> ApiResult<impl IntoResponse> {
    let runner = loaded(&state)?;
    let setup = runner.setup();
    Ok(Json(space_doc(&setup.space, &setup.plan, &runner.view())))
}

async fn run_state(State(state): State<AppState>) -> ApiResult<impl IntoResponse> {
    let view = loaded(&state)?.view();
    Ok(Json(state_doc(&view.state, view.seq)))
}

async fn control(
    State(state): State<AppState>,
    body: Result<Json<ControlRequest>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let runner = loaded(&state)?;
    let Json(req) = body.map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.body_text()))?;
    let new_state = runner.control(req.action).await?;
    Ok(Json(state_doc(&new_state, runner.view().seq)))
}

async fn progress(State(state): State<AppState>) -> ApiResult<impl IntoResponse> {
    let view = loaded(&state)?.view();
    Ok(Json(view.history.clone()))
}

async fn sensitivity(State(state): State<AppState>) -> ApiResult<impl IntoResponse> {
    let view = loaded(&state)?.view();
    Ok(Json(view.latest_snapshot().map(|s| s.sensitivity.clone()).unwrap_or_default()))
}

#[derive(Deserialize)]
struct UniverseQuery {
    decision: Option<String>,
}

async fn universes(State(state): State<AppState>, Query(q): Query<UniverseQuery>) -> ApiResult<impl IntoResponse> {
    let runner = loaded(&state)?;
    let setup = runner.setup();
    let decision = match &q.decision {
        Some(name) => Some(
            setup
                .space
                .decision_index(name)
                .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("unknown decision {name:?}")))?,
        ),
        None => None,
    };
    let view = runner.view();
    let mut records: Vec<_> = view
        .results
        .iter()
        .map(|r| universe_record(&setup.space, &setup.universes[r.universe_id], r, decision))
        .collect();
    records.sort_by_key(|r| r.id);
    Ok(Json(records))
}

#[derive(Deserialize)]
struct MessageQuery {
    universe_ids: Option<String>,
}

fn parse_ids(raw: &str) -> ApiResult<BTreeSet<usize>> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| ApiError(StatusCode::BAD_REQUEST, format!("bad universe id {s:?}"))))
        .collect()
}

async fn messages(State(state): State<AppState>, Query(q): Query<MessageQuery>) -> ApiResult<impl IntoResponse> {
    let view = loaded(&state)?.view();
    let selection = q.universe_ids.as_deref().map(parse_ids).transpose()?;
    let picked = view
        .results
        .iter()
        .filter(|r| selection.as_ref().is_none_or(|s| s.contains(&r.universe_id)))
        .map(|r| r.as_ref());
    Ok(Json(aggregate_messages(picked)))
}

async fn quality(State(state): State<AppState>, Path(id): Path<usize>) -> ApiResult<impl IntoResponse> {
    let view = loaded(&state)?.view();
    let missing = || ApiError(StatusCode::NOT_FOUND, format!("no quality data for universe {id}"));
    let r = view.result_for(id).ok_or_else(missing)?;
    let (Some(observed), Some(predicted)) = (&r.observed, &r.predicted) else {
        return Err(missing());
    };
    if observed.is_empty() || predicted.is_empty() {
        return Err(missing());
    }
    Ok(Json(QualityDoc {
        universe_id: id,
        quantile_dots: QuantileDots { observed: quantile_dots(observed), predicted: quantile_dots(predicted) },
        summary: QualitySummary { observed: summarize(observed), predicted: summarize(predicted) },
        observed: observed.clone(),
        predicted: predicted.clone(),
    }))
}

fn sse_event(kind: &str, seq: u64, payload: &impl serde::Serialize) -> Event {
    Event::default()
        .event(kind)
        .id(seq.to_string())
        .json_data(payload)
        .unwrap_or_else(|_| Event::default().event(kind).id(seq.to_string()).data("null"))
}

fn render(runner: &Runner, seq: u64, event: &RunEvent) -> Event {
    match event {
        RunEvent::StateChanged(s) => sse_event(event.kind(), seq, &state_doc(s, seq)),
        RunEvent::UniverseCompleted(r) => {
            let setup = runner.setup();
            let rec = universe_record(&setup.space, &setup.universes[r.universe_id], r, None);
            sse_event(event.kind(), seq, &rec)
        }
        RunEvent::Snapshot(s) => sse_event(event.kind(), seq, s.as_ref()),
    }
}

async fn events(State(state): State<AppState>) -> ApiResult<Sse<impl Stream<Item = Result<Event, Infallible>>>> {
    let runner = loaded(&state)?.clone();
    let (rx, view) = runner.subscribe();
    let first = sse_event("state_changed", view.seq, &state_doc(&view.state, view.seq));
    let after = view.seq;
    let rest = BroadcastStream::new(rx).filter_map(move |item| {
        let out = match item {
            Ok(ev) if ev.seq > after => Some(Ok(render(&runner, ev.seq, &ev.event))),
            Ok(_) => None,
            Err(e) => {
                tracing::warn!(error = %e, "event subscriber lagged");
                None
            }
        };
        futures::future::ready(out)
    });
    let stream = futures::stream::once(futures::future::ready(Ok(first))).chain(rest);
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}
