//! Executes universes as subprocesses in plan order under a pause/resume state
//! machine, logging results as JSON lines and publishing progress snapshots.

pub mod coordinator;
pub mod diagnostics;
pub mod exec;
pub mod log;
pub mod result;
pub mod snapshot;

pub use coordinator::{Action, ControlError, Phase, RunEvent, RunSetup, RunState, RunView, Runner, RunnerConfig, RunnerError, SeqEvent};
pub use diagnostics::{aggregate_messages, classify_stderr, AggregatedMessage, Diagnostic, Severity};
pub use exec::{execute_command, CommandExecutor, ExecConfig, Execution, Executor};
pub use result::{Status, UniverseResult};
pub use snapshot::{compute_snapshot, ProgressSnapshot, StatsConfig};
