//! Terminal and file rendering shared by `run` and `report`.

use std::fs;
use std::path::Path;

use mverse_core::stats::sensitivity::write_sensitivity_csv;
use mverse_core::stats::ConfidenceInterval;
use mverse_core::SensitivityScore;
use mverse_runner::AggregatedMessage;
use serde::Serialize;

use crate::error::{CliResult, Context};

pub const SENSITIVITY_FILE: &str = "sensitivity.csv";
pub const MESSAGES_FILE: &str = "messages.json";

/// Most sensitive first; undefined scores last, in manifest order.
pub fn ranked(scores: &[SensitivityScore]) -> Vec<SensitivityScore> {
    let mut v = scores.to_vec();
    v.sort_by(|a, b| match (a.score, b.score) {
        (Some(x), Some(y)) => y.total_cmp(&x),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    v
}

pub fn write_sensitivity(path: &Path, scores: &[SensitivityScore]) -> CliResult {
    let file = fs::File::create(path).runtime_ctx(format!("writing {}", path.display()))?;
    write_sensitivity_csv(&ranked(scores), file).runtime_ctx(format!("writing {}", path.display()))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> CliResult {
    let text = serde_json::to_string_pretty(value).runtime_ctx("serializing")?;
    fs::write(path, text + "\n").runtime_ctx(format!("writing {}", path.display()))
}

fn num(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => format!("{v:.4}"),
        Some(v) => v.to_string(),
        None => "-".into(),
    }
}

pub fn format_mean(mean: Option<f64>, ci: Option<&ConfidenceInterval>) -> String {
    match ci {
        Some(ci) => format!("{} [{}, {}]", num(mean), num(Some(ci.lo)), num(Some(ci.hi))),
        None => num(mean),
    }
}

pub fn print_report(
    completed: usize,
    failed: usize,
    total: usize,
    mean: Option<f64>,
    ci: Option<&ConfidenceInterval>,
    scores: &[SensitivityScore],
    messages: &[AggregatedMessage],
) {
    println!("completed {completed}/{total} ({failed} failed)");
    println!("mean outcome {}", format_mean(mean, ci));
    println!();
    let width = scores.iter().map(|s| s.decision.len()).max().unwrap_or(8).max(8);
    println!("{:<width$}  {:>10}  {:>23}", "decision", "score", "95% ci");
    for s in ranked(scores) {
        let ci = s.ci.map(|c| format!("[{}, {}]", num(Some(c.lo)), num(Some(c.hi)))).unwrap_or_else(|| "-".into());
        println!("{:<width$}  {:>10}  {:>23}", s.decision, num(s.score), ci);
    }
    if !messages.is_empty() {
        println!();
        println!("messages");
        for m in messages {
            let sev = format!("{:?}", m.severity).to_lowercase();
            println!("  {sev:<7} x{:<4} {}", m.count, m.normalized_text);
        }
    }
}
