//! The run coordinator: one task owns all run state, admits universes in plan order
//! and publishes immutable views plus an event stream.

use std::collections::VecDeque;
use std::fmt;
use std::io;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use mverse_core::{DecisionSpace, SamplePlan, Universe};
use serde::{Deserialize, Serialize};
use tokio::sync::{broadcast, mpsc, oneshot, watch};
use tokio::task::{JoinHandle, JoinSet};

use crate::exec::{Execution, Executor};
use crate::log::{read_jsonl, rewrite_jsonl, JsonlWriter, RESULTS_FILE, SNAPSHOTS_FILE};
use crate::result::UniverseResult;
use crate::snapshot::{compute_snapshot, ProgressSnapshot, StatsConfig};

/// Durations averaged for the ETA.
const ETA_WINDOW: usize = 20;
const TICK: Duration = Duration::from_millis(100);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Idle,
    Running,
    Paused,
    Completed,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Idle => "idle",
            Phase::Running => "running",
            Phase::Paused => "paused",
            Phase::Completed => "completed",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Start,
    Pause,
    Resume,
    Reset,
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Action::Start => "start",
            Action::Pause => "pause",
            Action::Resume => "resume",
            Action::Reset => "reset",
        })
    }
}

impl Phase {
    /// Phase after `action`, or `None` if the transition is illegal.
    pub fn apply(self, action: Action) -> Option<Phase> {
        match (self, action) {
            (Phase::Idle, Action::Start) => Some(Phase::Running),
            (Phase::Running, Action::Pause) => Some(Phase::Paused),
            (Phase::Paused, Action::Resume) => Some(Phase::Running),
            (Phase::Idle | Phase::Paused | Phase::Completed, Action::Reset) => Some(Phase::Idle),
            _ => None,
        }
    }

    pub fn allowed_actions(self) -> Vec<Action> {
        [Action::Start, Action::Pause, Action::Resume, Action::Reset]
            .into_iter()
            .filter(|&a| self.apply(a).is_some())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    pub phase: Phase,
    pub completed: usize,
    pub failed: usize,
    pub total: usize,
    /// Next plan position to consider for admission.
    pub cursor: usize,
    pub in_flight: usize,
    pub eta_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ControlError {
    #[error("cannot {action} while {phase}")]
    Illegal { action: Action, phase: Phase },
    #[error("runner has shut down")]
    Stopped,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "type", content = "payload", rename_all = "snake_case")]
pub enum RunEvent {
    StateChanged(RunState),
    UniverseCompleted(Arc<UniverseResult>),
    Snapshot(Arc<ProgressSnapshot>),
}

impl RunEvent {
    pub fn kind(&self) -> &'static str {
        match self {
            RunEvent::StateChanged(_) => "state_changed",
            RunEvent::UniverseCompleted(_) => "universe_completed",
            RunEvent::Snapshot(_) => "snapshot",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SeqEvent {
    pub seq: u64,
    pub event: RunEvent,
}

/// Everything a reader may look at, published atomically after each change.
#[derive(Debug, Clone)]
pub struct RunView {
    /// Sequence number of the last event emitted before this view.
    pub seq: u64,
    pub state: RunState,
    /// Results in completion order.
    pub results: Vec<Arc<UniverseResult>>,
    pub history: Vec<Arc<ProgressSnapshot>>,
}

impl RunView {
    pub fn latest_snapshot(&self) -> Option<&Arc<ProgressSnapshot>> {
        self.history.last()
    }

    pub fn result_for(&self, universe_id: usize) -> Option<&Arc<UniverseResult>> {
        self.results.iter().find(|r| r.universe_id == universe_id)
    }
}

#[derive(Debug, Clone)]
pub struct RunnerConfig {
    pub workers: usize,
    pub stats: StatsConfig,
    /// Bootstrap statistics are recomputed once both of these have elapsed.
    pub snapshot_interval: Duration,
    pub snapshot_min_completions: usize,
    /// Directory for `results.jsonl` and `snapshots.jsonl`; existing logs are resumed.
    pub log_dir: Option<PathBuf>,
}

impl Default for RunnerConfig {
    fn default() -> Self {
        RunnerConfig {
            workers: 1,
            stats: StatsConfig::default(),
            snapshot_interval: Duration::from_secs(2),
            snapshot_min_completions: 5,
            log_dir: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSetup {
    pub space: Arc<DecisionSpace>,
    pub universes: Arc<Vec<Universe>>,
    pub plan: Arc<SamplePlan>,
}

#[derive(Debug, thiserror::Error)]
pub enum RunnerError {
    #[error("workers must be at least 1")]
    NoWorkers,
    #[error("plan covers {plan} universes but the space has {space}")]
    PlanMismatch { plan: usize, space: usize },
    #[error("result log refers to universe {0}, which is outside the space")]
    ForeignLog(usize),
    #[error(transparent)]
    Io(#[from] io::Error),
}

enum Command {
    Control(Action, oneshot::Sender<Result<RunState, ControlError>>),
}

/// Handle to a running coordinator. Cheap to clone.
#[derive(Clone)]
pub struct Runner {
    tx: mpsc::Sender<Command>,
    view: watch::Receiver<Arc<RunView>>,
    events: broadcast::Sender<Arc<SeqEvent>>,
    setup: RunSetup,
}

impl Runner {
    /// Starts the coordinator in the idle phase, loading any results already logged
    /// under `config.log_dir`.
    pub fn spawn(setup: RunSetup, executor: Arc<dyn Executor>, config: RunnerConfig) -> Result<Runner, RunnerError> {
        if config.workers == 0 {
            return Err(RunnerError::NoWorkers);
        }
        let n = setup.universes.len();
        if setup.plan.order.len() != n {
            return Err(RunnerError::PlanMismatch { plan: setup.plan.order.len(), space: n });
        }
        let mut results: Vec<Arc<UniverseResult>> = Vec::new();
        let mut history: Vec<Arc<ProgressSnapshot>> = Vec::new();
        let mut writers = None;
        if let Some(dir) = &config.log_dir {
            std::fs::create_dir_all(dir)?;
            let logged: Vec<UniverseResult> = read_jsonl(dir.join(RESULTS_FILE))?;
            let mut seen = vec![false; n];
            for r in logged {
                if r.universe_id >= n {
                    return Err(RunnerError::ForeignLog(r.universe_id));
                }
                if !std::mem::replace(&mut seen[r.universe_id], true) {
                    results.push(Arc::new(r));
                }
            }
            let snaps: Vec<ProgressSnapshot> = read_jsonl(dir.join(SNAPSHOTS_FILE))?;
            rewrite_jsonl(dir.join(RESULTS_FILE), &results)?;
            rewrite_jsonl(dir.join(SNAPSHOTS_FILE), &snaps)?;
            history = snaps.into_iter().map(Arc::new).collect();
            writers = Some((JsonlWriter::append(dir.join(RESULTS_FILE))?, JsonlWriter::append(dir.join(SNAPSHOTS_FILE))?));
        }
        let (tx, rx) = mpsc::channel(64);
        let (events, _) = broadcast::channel(4096);
        let mut actor = Actor::new(setup.clone(), executor, config, results, history, writers, events.clone());
        let initial = actor.build_view();
        let (view_tx, view_rx) = watch::channel(initial);
        actor.view_tx = Some(view_tx);
        tokio::spawn(actor.run(rx));
        Ok(Runner { tx, view: view_rx, events, setup })
    }

    pub fn setup(&self) -> &RunSetup {
        &self.setup
    }

    pub async fn control(&self, action: Action) -> Result<RunState, ControlError> {
        let (reply, wait) = oneshot::channel();
        self.tx.send(Command::Control(action, reply)).await.map_err(|_| ControlError::Stopped)?;
        wait.await.map_err(|_| ControlError::Stopped)?
    }

    /// The most recently published view.
    pub fn view(&self) -> Arc<RunView> {
        self.view.borrow().clone()
    }

    pub fn state(&self) -> RunState {
        self.view.borrow().state.clone()
    }

    /// Subscribes to events. Events with `seq` at or below the returned view's `seq`
    /// are already reflected in the view.
    pub fn subscribe(&self) -> (broadcast::Receiver<Arc<SeqEvent>>, Arc<RunView>) {
        let rx = self.events.subscribe();
        (rx, self.view())
    }

    pub fn watch(&self) -> watch::Receiver<Arc<RunView>> {
        self.view.clone()
    }

    /// Waits until `pred` holds for a published view.
    pub async fn wait_for<F: Fn(&RunView) -> bool>(&self, pred: F) -> Arc<RunView> {
        let mut rx = self.view.clone();
        loop {
            let v = rx.borrow_and_update().clone();
            if pred(&v) {
                return v;
            }
            if rx.changed().await.is_err() {
                return self.view();
            }
        }
    }

    /// Waits for the run to reach `completed`, or for a pause with nothing in flight.
    pub async fn wait_until_settled(&self) -> Arc<RunView> {
        self.wait_for(|v| {
            v.state.phase == Phase::Completed || (v.state.phase == Phase::Paused && v.state.in_flight == 0)
        })
        .await
    }
}

type Finished = (u64, usize, f64, Execution);

struct Actor {
    setup: RunSetup,
    executor: Arc<dyn Executor>,
    config: RunnerConfig,
    phase: Phase,
    cursor: usize,
    done: Vec<bool>,
    results: Vec<Arc<UniverseResult>>,
    history: Vec<Arc<ProgressSnapshot>>,
    in_flight: JoinSet<Finished>,
    generation: u64,
    started: Instant,
    durations: VecDeque<f64>,
    since_snapshot: usize,
    last_snapshot: Instant,
    snapshot_task: Option<(u64, JoinHandle<ProgressSnapshot>)>,
    final_snapshot_due: bool,
    writers: Option<(JsonlWriter, JsonlWriter)>,
    seq: u64,
    events: broadcast::Sender<Arc<SeqEvent>>,
    view_tx: Option<watch::Sender<Arc<RunView>>>,
}

impl Actor {
    fn new(
        setup: RunSetup,
        executor: Arc<dyn Executor>,
        config: RunnerConfig,
        results: Vec<Arc<UniverseResult>>,
        history: Vec<Arc<ProgressSnapshot>>,
        writers: Option<(JsonlWriter, JsonlWriter)>,
        events: broadcast::Sender<Arc<SeqEvent>>,
    ) -> Self {
        let n = setup.universes.len();
        let mut done = vec![false; n];
        for r in &results {
            done[r.universe_id] = true;
        }
        let durations = results.iter().rev().take(ETA_WINDOW).map(|r| r.duration).collect();
        let elapsed = results.iter().map(|r| r.completed_at).fold(0.0, f64::max);
        let started = Instant::now().checked_sub(Duration::from_secs_f64(elapsed)).unwrap_or_else(Instant::now);
        Actor {
            setup,
            executor,
            config,
            phase: Phase::Idle,
            cursor: 0,
            done,
            results,
            history,
            in_flight: JoinSet::new(),
            generation: 0,
            started,
            durations,
            since_snapshot: 0,
            last_snapshot: Instant::now(),
            snapshot_task: None,
            final_snapshot_due: false,
            writers,
            seq: 0,
            events,
            view_tx: None,
        }
    }

    fn n(&self) -> usize {
        self.setup.universes.len()
    }

    fn elapsed(&self) -> f64 {
        self.started.elapsed().as_secs_f64()
    }

    fn eta(&self) -> Option<f64> {
        let remaining = self.n() - self.results.len();
        if remaining == 0 {
            return Some(0.0);
        }
        if self.durations.is_empty() {
            return None;
        }
        let mean = self.durations.iter().sum::<f64>() / self.durations.len() as f64;
        Some(mean * remaining as f64 / self.config.workers as f64)
    }

    fn state(&self) -> RunState {
        let failed = self.results.iter().filter(|r| !r.status.has_outcome()).count();
        RunState {
            phase: self.phase,
            completed: self.results.len(),
            failed,
            total: self.n(),
            cursor: self.cursor,
            in_flight: self.in_flight.len(),
            eta_seconds: self.eta(),
        }
    }

    fn build_view(&self) -> Arc<RunView> {
        Arc::new(RunView {
            seq: self.seq,
            state: self.state(),
            results: self.results.clone(),
            history: self.history.clone(),
        })
    }

    fn publish(&self) {
        if let Some(tx) = &self.view_tx {
            tx.send_replace(self.build_view());
        }
    }

    /// Publishes the new view first so subscribers never see an event ahead of it.
    fn emit(&mut self, event: RunEvent) {
        self.seq += 1;
        self.publish();
        let _ = self.events.send(Arc::new(SeqEvent { seq: self.seq, event }));
    }

    fn emit_state(&mut self) {
        let state = self.state();
        self.emit(RunEvent::StateChanged(state));
    }

    async fn run(mut self, mut rx: mpsc::Receiver<Command>) {
        let mut tick = tokio::time::interval(TICK);
        tick.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
        loop {
            tokio::select! {
                cmd = rx.recv() => match cmd {
                    Some(Command::Control(action, reply)) => {
                        let r = self.control(action);
                        let _ = reply.send(r);
                    }
                    None => break,
                },
                Some(joined) = self.in_flight.join_next(), if !self.in_flight.is_empty() => {
                    if let Ok(finished) = joined {
                        self.finish(finished);
                    }
                }
                snap = async { (&mut self.snapshot_task.as_mut().unwrap().1).await }, if self.snapshot_task.is_some() => {
                    let (generation, _) = self.snapshot_task.take().unwrap();
                    if let (Ok(snap), true) = (snap, generation == self.generation) {
                        self.record_snapshot(snap);
                    }
                    self.maybe_snapshot();
                }
                _ = tick.tick() => self.maybe_snapshot(),
            }
        }
        self.in_flight.abort_all();
    }

    fn control(&mut self, action: Action) -> Result<RunState, ControlError> {
        let next = self.phase.apply(action).ok_or(ControlError::Illegal { action, phase: self.phase })?;
        match action {
            Action::Start => {
                self.started = Instant::now()
                    .checked_sub(Duration::from_secs_f64(self.results.iter().map(|r| r.completed_at).fold(0.0, f64::max)))
                    .unwrap_or_else(Instant::now);
                self.cursor = 0;
                self.phase = next;
            }
            Action::Reset => {
                self.generation += 1;
                self.in_flight = JoinSet::new();
                self.snapshot_task = None;
                self.results.clear();
                self.history.clear();
                self.done.iter_mut().for_each(|d| *d = false);
                self.durations.clear();
                self.cursor = 0;
                self.since_snapshot = 0;
                self.final_snapshot_due = false;
                if let Some((r, s)) = &mut self.writers {
                    if let Err(e) = r.truncate().and_then(|_| s.truncate()) {
                        tracing::error!(error = %e, "failed to truncate run logs");
                    }
                }
                self.phase = next;
            }
            Action::Pause | Action::Resume => self.phase = next,
        }
        tracing::info!(%action, phase = %self.phase, "run control");
        self.admit();
        self.check_complete();
        self.emit_state();
        Ok(self.state())
    }

    fn admit(&mut self) {
        if self.phase != Phase::Running {
            return;
        }
        while self.in_flight.len() < self.config.workers && self.cursor < self.n() {
            let pos = self.cursor;
            self.cursor += 1;
            let id = self.setup.plan.order[pos];
            if self.done[id] {
                continue;
            }
            let admitted_at = self.elapsed();
            let fut = self.executor.execute(&self.setup.universes[id]);
            let generation = self.generation;
            self.in_flight.spawn(async move { (generation, pos, admitted_at, fut.await) });
        }
    }

    fn check_complete(&mut self) {
        if self.phase == Phase::Running && self.cursor >= self.n() && self.in_flight.is_empty() {
            self.phase = Phase::Completed;
            self.final_snapshot_due = true;
            tracing::info!(completed = self.results.len(), "run completed");
        }
    }

    fn finish(&mut self, (generation, pos, admitted_at, exec): Finished) {
        if generation != self.generation {
            return;
        }
        let id = self.setup.plan.order[pos];
        let result = Arc::new(UniverseResult {
            universe_id: id,
            order_index: pos,
            g: self.setup.plan.g[pos],
            status: exec.status,
            outcome: exec.outcome,
            quality: exec.quality,
            observed: exec.observed,
            predicted: exec.predicted,
            exit_code: exec.exit_code,
            stderr_text: exec.stderr_text,
            diagnostics: exec.diagnostics,
            duration: exec.duration,
            admitted_at,
            completed_at: self.elapsed(),
        });
        if let Some((w, _)) = &mut self.writers {
            if let Err(e) = w.write(result.as_ref()) {
                tracing::error!(error = %e, universe = id, "failed to append result log");
            }
        }
        self.done[id] = true;
        self.results.push(result.clone());
        if self.durations.len() == ETA_WINDOW {
            self.durations.pop_front();
        }
        self.durations.push_back(result.duration);
        self.since_snapshot += 1;
        self.admit();
        self.emit(RunEvent::UniverseCompleted(result));
        let before = self.phase;
        self.check_complete();
        if self.phase != before {
            self.emit_state();
        }
        self.maybe_snapshot();
    }

    fn maybe_snapshot(&mut self) {
        let stale = self.history.last().map(|s| s.completed) != Some(self.results.len());
        if self.snapshot_task.is_some() || !stale {
            return;
        }
        let due = self.final_snapshot_due
            || (self.since_snapshot >= self.config.snapshot_min_completions
                && self.last_snapshot.elapsed() >= self.config.snapshot_interval);
        if !due {
            return;
        }
        self.final_snapshot_due = false;
        self.since_snapshot = 0;
        self.last_snapshot = Instant::now();
        let space = self.setup.space.clone();
        let universes = self.setup.universes.clone();
        let results = self.results.clone();
        let cfg = self.config.stats;
        let t = self.elapsed();
        let eta = self.eta();
        let handle = tokio::task::spawn_blocking(move || compute_snapshot(&space, &universes, &results, &cfg, t, eta));
        self.snapshot_task = Some((self.generation, handle));
    }

    fn record_snapshot(&mut self, snap: ProgressSnapshot) {
        if let Some((_, w)) = &mut self.writers {
            if let Err(e) = w.write(&snap) {
                tracing::error!(error = %e, "failed to append snapshot log");
            }
        }
        let snap = Arc::new(snap);
        self.history.push(snap.clone());
        self.emit(RunEvent::Snapshot(snap));
    }
}
