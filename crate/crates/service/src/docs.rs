//! Builds response documents from one published run view.

use std::collections::BTreeMap;

use mverse_client::wire::{
    Binding, DecisionDoc, EdgeDoc, EdgeKind, EndpointDoc, SpaceDoc, StateDoc, UniverseRecord, VersionDoc, API_VERSION,
};
use mverse_core::{DecisionSpace, SamplePlan, Universe};
use mverse_runner::{RunState, RunView, UniverseResult};

pub fn version_doc() -> VersionDoc {
    let ep = |method: &str, path: &str, returns: &str| EndpointDoc {
        method: method.into(),
        path: path.into(),
        returns: returns.into(),
    };
    VersionDoc {
        api_version: API_VERSION,
        server_version: env!("CARGO_PKG_VERSION").into(),
        endpoints: vec![
            ep("GET", "/api/version", "VersionDoc"),
            ep("GET", "/api/space", "SpaceDoc"),
            ep("GET", "/api/state", "StateDoc"),
            ep("POST", "/api/control", "StateDoc"),
            ep("GET", "/api/progress", "[ProgressSnapshot]"),
            ep("GET", "/api/sensitivity", "[SensitivityScore]"),
            ep("GET", "/api/universes", "[UniverseRecord]"),
            ep("GET", "/api/messages", "[AggregatedMessage]"),
            ep("GET", "/api/quality/{universe_id}", "QualityDoc"),
            ep("GET", "/api/events", "text/event-stream of ApiEvent"),
        ],
        event_types: ["state_changed", "universe_completed", "snapshot"].map(String::from).to_vec(),
    }
}

pub fn state_doc(state: &RunState, seq: u64) -> StateDoc {
    StateDoc { state: state.clone(), seq, allowed_actions: state.phase.allowed_actions() }
}

pub fn space_doc(space: &DecisionSpace, plan: &SamplePlan, view: &RunView) -> SpaceDoc {
    let latest = view.latest_snapshot();
    let decisions = space
        .decisions
        .iter()
        .map(|d| DecisionDoc {
            name: d.name.clone(),
            options: d.options.iter().map(|o| o.name.clone()).collect(),
            cardinality: d.cardinality(),
            sensitivity: latest.and_then(|s| s.sensitivity.iter().find(|x| x.decision == d.name).cloned()),
        })
        .collect();
    let rules: Vec<Vec<Binding>> = space
        .rules
        .iter()
        .map(|r| {
            r.bindings()
                .iter()
                .map(|&(d, o)| Binding { decision: space.decisions[d].name.clone(), option: space.option_name(d, o).into() })
                .collect()
        })
        .collect();
    let mut edges: Vec<EdgeDoc> = space
        .decisions
        .windows(2)
        .map(|w| EdgeDoc { from: w[0].name.clone(), to: w[1].name.clone(), kind: EdgeKind::Order })
        .collect();
    for r in &space.rules {
        let b = r.bindings();
        for (i, &(from, _)) in b.iter().enumerate() {
            for &(to, _) in &b[i + 1..] {
                let e = EdgeDoc {
                    from: space.decisions[from].name.clone(),
                    to: space.decisions[to].name.clone(),
                    kind: EdgeKind::Dependency,
                };
                if !edges.contains(&e) {
                    edges.push(e);
                }
            }
        }
    }
    SpaceDoc {
        name: space.name.clone(),
        total_universes: plan.len(),
        sampler: plan.kind.as_str().into(),
        decisions,
        rules,
        edges,
    }
}

pub fn universe_record(space: &DecisionSpace, universe: &Universe, r: &UniverseResult, decision: Option<usize>) -> UniverseRecord {
    let assignment: BTreeMap<String, String> =
        space.assignment(universe).into_iter().map(|(d, o)| (d.to_string(), o.to_string())).collect();
    UniverseRecord {
        id: r.universe_id,
        order_index: r.order_index,
        status: r.status,
        outcome: r.outcome,
        quality: r.quality,
        has_quality_data: r.observed.is_some() && r.predicted.is_some(),
        duration: r.duration,
        assignment,
        option: decision.map(|d| space.option_name(d, universe.options[d]).to_string()),
    }
}
