//! JSON documents exchanged with the service.

use std::collections::BTreeMap;

use mverse_core::SensitivityScore;
use mverse_runner::{Action, RunState, Status};
use serde::{Deserialize, Serialize};

/// Bumped whenever a document below changes shape.
pub const API_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VersionDoc {
    pub api_version: u32,
    pub server_version: String,
    pub endpoints: Vec<EndpointDoc>,
    pub event_types: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointDoc {
    pub method: String,
    pub path: String,
    pub returns: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceDoc {
    pub name: String,
    pub total_universes: usize,
    pub sampler: String,
    pub decisions: Vec<DecisionDoc>,
    pub rules: Vec<Vec<Binding>>,
    pub edges: Vec<EdgeDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionDoc {
    pub name: String,
    pub options: Vec<String>,
    pub cardinality: usize,
    /// Latest score, or `None` before the first snapshot.
    pub sensitivity: Option<SensitivityScore>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Binding {
    pub decision: String,
    pub option: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    /// Consecutive decisions in manifest order.
    Order,
    /// Decisions tied together by an exclusion rule.
    Dependency,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub from: String,
    pub to: String,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDoc {
    #[serde(flatten)]
    pub state: RunState,
    pub seq: u64,
    pub allowed_actions: Vec<Action>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlRequest {
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniverseRecord {
    pub id: usize,
    pub order_index: usize,
    pub status: Status,
    pub outcome: Option<f64>,
    pub quality: Option<f64>,
    pub has_quality_data: bool,
    pub duration: f64,
    pub assignment: BTreeMap<String, String>,
    /// Option of the decision named in the query, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub option: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityDoc {
    pub universe_id: usize,
    pub observed: Vec<f64>,
    pub predicted: Vec<f64>,
    pub quantile_dots: QuantileDots,
    pub summary: QualitySummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileDots {
    pub observed: Vec<f64>,
    pub predicted: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualitySummary {
    pub observed: Summary,
    pub predicted: Summary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDoc {
    pub error: String,
}

/// One server-sent event. `payload` is the `data:` field, `seq` the `id:` field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiEvent {
    pub seq: u64,
    #[serde(rename = "type")]
    pub kind: String,
    pub payload: serde_json::Value,
}
