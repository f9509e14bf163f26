//! Stderr heuristics and message aggregation.

use std::collections::{BTreeSet, HashMap};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::result::UniverseResult;

/// Errors sort before warnings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggregatedMessage {
    pub normalized_text: String,
    pub severity: Severity,
    pub universe_ids: BTreeSet<usize>,
    pub count: usize,
}

struct Patterns {
    addr: Regex,
    path: Regex,
    number: Regex,
}

fn patterns() -> &'static Patterns {
    static P: OnceLock<Patterns> = OnceLock::new();
    P.get_or_init(|| Patterns {
        addr: Regex::new(r"0[xX][0-9a-fA-F]+").unwrap(),
        path: Regex::new(r#"(?:[A-Za-z]:)?(?:\.{1,2})?(?:[/\\][^\s/\\:'"(),]+)+|(?:[\w.-]+[/\\])+[\w.-]+"#).unwrap(),
        number: Regex::new(r"\b\d+(?:\.\d+)?(?:[eE][-+]?\d+)?\b").unwrap(),
    })
}

/// Replaces memory addresses, paths and numerals with placeholders.
pub fn normalize(line: &str) -> String {
    let p = patterns();
    let s = p.addr.replace_all(line.trim(), "<ADDR>");
    let s = p.path.replace_all(&s, "<PATH>");
    p.number.replace_all(&s, "<N>").into_owned()
}

/// Scans stderr for Python-style tracebacks (reported as the final exception line)
/// and lines mentioning "warning". Returns diagnostics in order of appearance.
pub fn classify_stderr(text: &str) -> Vec<Diagnostic> {
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        let line = lines[i];
        if line.starts_with("Traceback") {
            // Frames are indented; the exception line is the first flush-left line after them.
            let mut j = i + 1;
            while j < lines.len() && (lines[j].trim().is_empty() || lines[j].starts_with(char::is_whitespace)) {
                j += 1;
            }
            let message = lines.get(j).map(|l| normalize(l)).unwrap_or_else(|| "Traceback".to_string());
            out.push(Diagnostic { severity: Severity::Error, message });
            i = j + 1;
            continue;
        }
        if line.to_ascii_lowercase().contains("warning") {
            out.push(Diagnostic { severity: Severity::Warning, message: normalize(line) });
        }
        i += 1;
    }
    out
}

/// Groups identical normalized messages across universes, errors first, then by
/// descending universe count, then by text.
pub fn aggregate_messages<'a, I>(results: I) -> Vec<AggregatedMessage>
where
    I: IntoIterator<Item = &'a UniverseResult>,
{
    let mut groups: HashMap<(Severity, &str), BTreeSet<usize>> = HashMap::new();
    for r in results {
        for d in &r.diagnostics {
            groups.entry((d.severity, d.message.as_str())).or_default().insert(r.universe_id);
        }
    }
    let mut out: Vec<AggregatedMessage> = groups
        .into_iter()
        .map(|((severity, text), ids)| AggregatedMessage {
            normalized_text: text.to_string(),
            severity,
            count: ids.len(),
            universe_ids: ids,
        })
        .collect();
    out.sort_by(|a, b| {
        a.severity
            .cmp(&b.severity)
            .then(b.count.cmp(&a.count))
            .then_with(|| a.normalized_text.cmp(&b.normalized_text))
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::result::Status;

    fn result(id: usize, diagnostics: Vec<Diagnostic>) -> UniverseResult {
        UniverseResult {
            universe_id: id,
            order_index: id,
            g: 1.0,
            status: Status::Ok,
            outcome: Some(0.0),
            quality: None,
            observed: None,
            predicted: None,
            exit_code: Some(0),
            stderr_text: String::new(),
            diagnostics,
            duration: 0.0,
            admitted_at: 0.0,
            completed_at: 0.0,
        }
    }

    fn warn(m: &str) -> Diagnostic {
        Diagnostic { severity: Severity::Warning, message: m.into() }
    }

    #[test]
    fn traceback_reports_exception_line() {
        let text = "Traceback (most recent call last):\n  File \"/x/a.py\", line 3, in <module>\n    1/0\nZeroDivisionError: division by zero\n";
        assert_eq!(
            classify_stderr(text),
            vec![Diagnostic { severity: Severity::Error, message: "ZeroDivisionError: division by zero".into() }]
        );
    }

    #[test]
    fn warning_numerals_stripped() {
        assert_eq!(
            classify_stderr("ConvergenceWarning: max iterations (100) reached"),
            vec![warn("ConvergenceWarning: max iterations (<N>) reached")]
        );
    }

    #[test]
    fn empty_stderr() {
        assert!(classify_stderr("").is_empty());
        assert!(classify_stderr("fitting model\ndone\n").is_empty());
    }

    #[test]
    fn paths_and_addresses_stripped() {
        assert_eq!(
            normalize("/home/u/run/u12.py:40: UserWarning: object at 0x7f3a2c1d0 leaked"),
            "<PATH>:<N>: UserWarning: object at <ADDR> leaked"
        );
        assert_eq!(normalize("RuntimeWarning in data/fold_3.csv"), "RuntimeWarning in <PATH>");
        assert_eq!(normalize("float64 overflow"), "float64 overflow");
    }

    #[test]
    fn same_warning_aggregates() {
        let rs: Vec<_> = (0..3).map(|i| result(i, vec![warn("W")])).collect();
        let agg = aggregate_messages(&rs);
        assert_eq!(agg.len(), 1);
        assert_eq!(agg[0].count, 3);
    }

    #[test]
    fn errors_first_despite_count() {
        let mut rs: Vec<_> = (0..5).map(|i| result(i, vec![warn("W")])).collect();
        rs.push(result(9, vec![Diagnostic { severity: Severity::Error, message: "E".into() }]));
        let agg = aggregate_messages(&rs);
        assert_eq!(agg[0].severity, Severity::Error);
        assert_eq!(agg[1].count, 5);
    }

    #[test]
    fn no_diagnostics() {
        assert!(aggregate_messages(&[result(0, vec![])]).is_empty());
    }
}
