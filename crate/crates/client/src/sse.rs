//! Incremental `text/event-stream` parser.

use crate::wire::ApiEvent;

#[derive(Debug, Default)]
pub struct SseParser {
    buf: Vec<u8>,
    event: Option<String>,
    data: Vec<String>,
    id: Option<String>,
}

impl SseParser {
    pub fn new() -> Self {
        Self::default()
    }

    /// Feeds raw text and returns every event completed by it.
    pub fn push(&mut self, chunk: &[u8]) -> Vec<Result<ApiEvent, String>> {
        self.buf.extend_from_slice(chunk);
        let mut out = Vec::new();
        while let Some(nl) = self.buf.iter().position(|&b| b == b'\n') {
            let raw: Vec<u8> = self.buf.drain(..=nl).collect();
            let line = String::from_utf8_lossy(&raw);
            let line = line.trim_end_matches(['\n', '\r']);
            if line.is_empty() {
                if let Some(ev) = self.dispatch() {
                    out.push(ev);
                }
                continue;
            }
            if line.starts_with(':') {
                continue;
            }
            let (field, value) = match line.split_once(':') {
                Some((f, v)) => (f, v.strip_prefix(' ').unwrap_or(v)),
                None => (line, ""),
            };
            match field {
                "event" => self.event = Some(value.to_string()),
                "data" => self.data.push(value.to_string()),
                "id" => self.id = Some(value.to_string()),
                _ => {}
            }
        }
        out
    }

    fn dispatch(&mut self) -> Option<Result<ApiEvent, String>> {
        let kind = self.event.take();
        let id = self.id.take();
        if self.data.is_empty() {
            return None;
        }
        let data = std::mem::take(&mut self.data).join("\n");
        let kind = kind.unwrap_or_else(|| "message".into());
        let seq = match id.as_deref().map(str::parse::<u64>) {
            Some(Ok(s)) => s,
            _ => return Some(Err(format!("event {kind} has no numeric id"))),
        };
        Some(
            serde_json::from_str(&data)
                .map(|payload| ApiEvent { seq, kind, payload })
                .map_err(|e| format!("event {seq}: {e}")),
        )
    }
}
