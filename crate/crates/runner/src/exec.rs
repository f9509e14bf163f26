//! Launching one universe as a subprocess.

use std::future::Future;
use std::path::PathBuf;
use std::pin::Pin;
use std::process::Stdio;
use std::time::{Duration, Instant};

use mverse_core::{DecisionSpace, Universe};
use tokio::process::Command;

use crate::diagnostics::{classify_stderr, normalize, Diagnostic, Severity};
use crate::result::{parse_result_line, Status};

/// Largest stderr excerpt kept on a result.
const STDERR_LIMIT: usize = 64 * 1024;

#[derive(Debug, Clone)]
pub struct ExecConfig {
    pub timeout: Duration,
    pub workdir: PathBuf,
    /// Environment variables copied from the parent; everything else is cleared.
    pub env_passthrough: Vec<String>,
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig {
            timeout: Duration::from_secs(600),
            workdir: PathBuf::from("."),
            env_passthrough: ["PATH", "HOME", "LANG", "LC_ALL", "TMPDIR", "PYTHONPATH", "R_LIBS_USER"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }
}

/// What an executor reports back; the coordinator adds plan bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub status: Status,
    pub outcome: Option<f64>,
    pub quality: Option<f64>,
    pub observed: Option<Vec<f64>>,
    pub predicted: Option<Vec<f64>>,
    pub exit_code: Option<i32>,
    pub stderr_text: String,
    pub diagnostics: Vec<Diagnostic>,
    pub duration: f64,
}

impl Execution {
    /// Classifies a finished process per the universe protocol.
    pub fn from_output(exit_code: Option<i32>, stdout: &str, stderr: &str, duration: f64) -> Execution {
        let mut diagnostics = classify_stderr(stderr);
        let mut exec = Execution {
            status: Status::Ok,
            outcome: None,
            quality: None,
            observed: None,
            predicted: None,
            exit_code,
            stderr_text: truncate(stderr),
            diagnostics: Vec::new(),
            duration,
        };
        if exit_code != Some(0) {
            if !diagnostics.iter().any(|d| d.severity == Severity::Error) {
                let message = stderr
                    .lines()
                    .rev()
                    .find(|l| !l.trim().is_empty())
                    .map(normalize)
                    .unwrap_or_else(|| match exit_code {
                        Some(c) => format!("exited with status {c}"),
                        None => "terminated by signal".to_string(),
                    });
                diagnostics.push(Diagnostic { severity: Severity::Error, message });
            }
            exec.status = Status::Error;
        } else {
            match parse_result_line(stdout) {
                Some(rec) => {
                    exec.status = if diagnostics.is_empty() { Status::Ok } else { Status::Warning };
                    exec.outcome = Some(rec.outcome);
                    exec.quality = rec.quality;
                    exec.observed = rec.observed;
                    exec.predicted = rec.predicted;
                }
                None => exec.status = Status::InvalidOutput,
            }
        }
        exec.diagnostics = diagnostics;
        exec
    }

    pub fn timed_out(duration: f64) -> Execution {
        Execution {
            status: Status::Timeout,
            outcome: None,
            quality: None,
            observed: None,
            predicted: None,
            exit_code: None,
            stderr_text: String::new(),
            diagnostics: vec![Diagnostic { severity: Severity::Error, message: "timed out".into() }],
            duration,
        }
    }

    pub fn launch_failure(message: String) -> Execution {
        Execution {
            status: Status::Error,
            outcome: None,
            quality: None,
            observed: None,
            predicted: None,
            exit_code: None,
            stderr_text: message.clone(),
            diagnostics: vec![Diagnostic { severity: Severity::Error, message: normalize(&message) }],
            duration: 0.0,
        }
    }
}

fn truncate(s: &str) -> String {
    if s.len() <= STDERR_LIMIT {
        return s.to_string();
    }
    let mut end = STDERR_LIMIT;
    while !s.is_char_boundary(end) {
        end -= 1;
    }
    s[..end].to_string()
}

pub type ExecFuture = Pin<Box<dyn Future<Output = Execution> + Send>>;

/// Runs one universe. Implementations must be cancel-safe: dropping the future
/// abandons the universe.
pub trait Executor: Send + Sync + 'static {
    fn execute(&self, universe: &Universe) -> ExecFuture;
}

/// Runs the manifest's command template through `sh -c`.
pub struct CommandExecutor {
    space: std::sync::Arc<DecisionSpace>,
    config: ExecConfig,
}

impl CommandExecutor {
    pub fn new(space: std::sync::Arc<DecisionSpace>, config: ExecConfig) -> Self {
        CommandExecutor { space, config }
    }
}

impl Executor for CommandExecutor {
    fn execute(&self, universe: &Universe) -> ExecFuture {
        let command = self.space.render_command(universe);
        let config = self.config.clone();
        Box::pin(async move {
            let Some(command) = command else {
                return Execution::launch_failure("manifest has no command template".into());
            };
            execute_command(&command, &config).await
        })
    }
}

/// Executes a shell command under the wall-clock cap and classifies the result.
pub async fn execute_command(command: &str, config: &ExecConfig) -> Execution {
    let mut cmd = Command::new("sh");
    cmd.arg("-c")
        .arg(command)
        .current_dir(&config.workdir)
        .env_clear()
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .kill_on_drop(true);
    for key in &config.env_passthrough {
        if let Ok(v) = std::env::var(key) {
            cmd.env(key, v);
        }
    }
    let started = Instant::now();
    let child = match cmd.spawn() {
        Ok(c) => c,
        Err(e) => return Execution::launch_failure(format!("failed to launch: {e}")),
    };
    match tokio::time::timeout(config.timeout, child.wait_with_output()).await {
        Err(_) => Execution::timed_out(started.elapsed().as_secs_f64()),
        Ok(Err(e)) => Execution::launch_failure(format!("failed to collect output: {e}")),
        Ok(Ok(out)) => Execution::from_output(
            out.status.code(),
            &String::from_utf8_lossy(&out.stdout),
            &String::from_utf8_lossy(&out.stderr),
            started.elapsed().as_secs_f64(),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(timeout_ms: u64) -> ExecConfig {
        ExecConfig { timeout: Duration::from_millis(timeout_ms), ..ExecConfig::default() }
    }

    #[tokio::test]
    async fn ok_outcome() {
        let e = execute_command(r#"echo '{"outcome": 2.2}'"#, &cfg(5000)).await;
        assert_eq!(e.status, Status::Ok);
        assert_eq!(e.outcome, Some(2.2));
    }

    #[tokio::test]
    async fn nonzero_exit_is_error() {
        let e = execute_command(
            r#"printf 'Traceback (most recent call last):\n  File "x.py", line 1\nValueError: bad\n' >&2; exit 1"#,
            &cfg(5000),
        )
        .await;
        assert_eq!(e.status, Status::Error);
        assert_eq!(e.outcome, None);
        assert_eq!(e.diagnostics[0].message, "ValueError: bad");
    }

    #[tokio::test]
    async fn timeout_enforced() {
        let e = execute_command("sleep 5", &cfg(100)).await;
        assert_eq!(e.status, Status::Timeout);
        assert!(e.duration < 2.0);
    }

    #[tokio::test]
    async fn unparseable_output() {
        let e = execute_command("echo done", &cfg(5000)).await;
        assert_eq!(e.status, Status::InvalidOutput);
    }

    #[tokio::test]
    async fn warning_on_clean_exit() {
        let e = execute_command(r#"echo 'UserWarning: 3 rows dropped' >&2; echo '{"outcome": 1}'"#, &cfg(5000)).await;
        assert_eq!(e.status, Status::Warning);
        assert_eq!(e.outcome, Some(1.0));
        assert_eq!(e.diagnostics[0].message, "UserWarning: <N> rows dropped");
    }

    #[test]
    fn silent_failure_gets_a_message() {
        let e = Execution::from_output(Some(3), "", "", 0.0);
        assert_eq!(e.diagnostics[0].message, "exited with status 3");
    }
}
