//! HTTP client for the multiverse service.

pub mod sse;
pub mod wire;

use futures::{Stream, StreamExt};
use mverse_core::SensitivityScore;
use mverse_runner::{Action, AggregatedMessage, ProgressSnapshot};
use reqwest::StatusCode;
use serde::de::DeserializeOwned;

use crate::sse::SseParser;
use crate::wire::{ApiEvent, ControlRequest, ErrorDoc, QualityDoc, SpaceDoc, StateDoc, UniverseRecord, VersionDoc};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("server returned {status}: {message}")]
    Status { status: StatusCode, message: String },
    #[error(transparent)]
    Http(#[from] reqwest::Error),
    #[error("malformed event stream: {0}")]
    Stream(String),
}

#[derive(Debug, Clone)]
pub struct Client {
    base: String,
    http: reqwest::Client,
}

impl Client {
    /// `base` is the server root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: impl Into<String>) -> Self {
        let base = base.into().trim_end_matches('/').to_string();
        Client { base, http: reqwest::Client::new() }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.base, path)
    }

    async fn decode<T: DeserializeOwned>(resp: reqwest::Response) -> Result<T, ClientError> {
        let status = resp.status();
        if status.is_success() {
            return Ok(resp.json().await?);
        }
        let text = resp.text().await.unwrap_or_default();
        let message = serde_json::from_str::<ErrorDoc>(&text).map(|e| e.error).unwrap_or(text);
        Err(match status {
            StatusCode::CONFLICT => ClientError::Conflict(message),
            StatusCode::NOT_FOUND => ClientError::NotFound(message),
            _ => ClientError::Status { status, message },
        })
    }

    async fn get<T: DeserializeOwned>(&self, path: &str, query: &[(&str, String)]) -> Result<T, ClientError> {
        let resp = self.http.get(self.url(path)).query(query).send().await?;
        Self::decode(resp).await
    }

    pub async fn version(&self) -> Result<VersionDoc, ClientError> {
        self.get("/api/version", &[]).await
    }

    pub async fn space(&self) -> Result<SpaceDoc, ClientError> {
        self.get("/api/space", &[]).await
    }

    pub async fn state(&self) -> Result<StateDoc, ClientError> {
        self.get("/api/state", &[]).await
    }

    pub async fn progress(&self) -> Result<Vec<ProgressSnapshot>, ClientError> {
        self.get("/api/progress", &[]).await
    }

    pub async fn sensitivity(&self) -> Result<Vec<SensitivityScore>, ClientError> {
        self.get("/api/sensitivity", &[]).await
    }

    pub async fn universes(&self, decision: Option<&str>) -> Result<Vec<UniverseRecord>, ClientError> {
        let q: Vec<(&str, String)> = decision.map(|d| ("decision", d.to_string())).into_iter().collect();
        self.get("/api/universes", &q).await
    }

    pub async fn messages(&self, universe_ids: Option<&[usize]>) -> Result<Vec<AggregatedMessage>, ClientError> {
        let q: Vec<(&str, String)> = universe_ids
            .map(|ids| ("universe_ids", ids.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")))
            .into_iter()
            .collect();
        self.get("/api/messages", &q).await
    }

    pub async fn quality(&self, universe_id: usize) -> Result<QualityDoc, ClientError> {
        self.get(&format!("/api/quality/{universe_id}"), &[]).await
    }

    pub async fn control(&self, action: Action) -> Result<StateDoc, ClientError> {
        let resp = self.http.post(self.url("/api/control")).json(&ControlRequest { action }).send().await?;
        Self::decode(resp).await
    }

    /// Opens the event stream. The first event is always `state_changed`.
    pub async fn events(&self) -> Result<impl Stream<Item = Result<ApiEvent, ClientError>>, ClientError> {
        let resp = self.http.get(self.url("/api/events")).send().await?;
        let status = resp.status();
        if !status.is_success() {
            return Err(ClientError::Status { status, message: resp.text().await.unwrap_or_default() });
        }
        let mut parser = SseParser::new();
        let stream = resp.bytes_stream().flat_map(move |chunk| {
            let out: Vec<Result<ApiEvent, ClientError>> = match chunk {
                Ok(bytes) => parser
                    .push(&bytes)
                    .into_iter()
                    .map(|r| r.map_err(ClientError::Stream))
                    .collect(),
                Err(e) => vec![Err(ClientError::Http(e))],
            };
            futures::stream::iter(out)
        });
        Ok(stream)
    }
}
