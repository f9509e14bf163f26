//! Append-only JSON-lines persistence for results and snapshots.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

pub const RESULTS_FILE: &str = "results.jsonl";
pub const SNAPSHOTS_FILE: &str = "snapshots.jsonl";

pub struct JsonlWriter {
    path: PathBuf,
    file: File,
}

impl JsonlWriter {
    pub fn append(path: impl AsRef<Path>) -> io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(JsonlWriter { path, file })
    }

    /// Writes one record and flushes it, so a crash loses at most the line in progress.
    pub fn write<T: Serialize>(&mut self, record: &T) -> io::Result<()> {
        let mut line = serde_json::to_vec(record)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.flush()
    }

    pub fn truncate(&mut self) -> io::Result<()> {
        self.file = OpenOptions::new().create(true).write(true).truncate(true).open(&self.path)?;
        self.file = OpenOptions::new().append(true).open(&self.path)?;
        Ok(())
    }
}

/// Replaces the file's contents with `records`, dropping any torn tail.
pub fn rewrite_jsonl<T: Serialize>(path: impl AsRef<Path>, records: &[T]) -> io::Result<()> {
    let path = path.as_ref();
    let tmp = path.with_extension("jsonl.tmp");
    {
        let mut f = io::BufWriter::new(File::create(&tmp)?);
        for r in records {
            serde_json::to_writer(&mut f, r)?;
            f.write_all(b"\n")?;
        }
        f.flush()?;
    }
    std::fs::rename(tmp, path)
}

/// Reads every parseable record. A torn final line from an interrupted write is
/// skipped; a malformed line elsewhere is an error.
pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> io::Result<Vec<T>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    let lines: Vec<String> = BufReader::new(file).lines().collect::<io::Result<_>>()?;
    let last = lines.iter().rposition(|l| !l.trim().is_empty());
    let mut out = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(v) => out.push(v),
            Err(_) if Some(i) == last => tracing::warn!(line = i + 1, "skipping torn final log line"),
            Err(e) => return Err(io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {e}", i + 1))),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_torn_tail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.jsonl");
        let mut w = JsonlWriter::append(&path).unwrap();
        w.write(&serde_json::json!({"a": 1})).unwrap();
        w.write(&serde_json::json!({"a": 2})).unwrap();
        std::fs::OpenOptions::new().append(true).open(&path).unwrap().write_all(b"{\"a\": 3").unwrap();
        let v: Vec<serde_json::Value> = read_jsonl(&path).unwrap();
        assert_eq!(v.len(), 2);
        w.truncate().unwrap();
        assert!(read_jsonl::<serde_json::Value>(&path).unwrap().is_empty());
    }

    #[test]
    fn missing_file_is_empty() {
        let v: Vec<serde_json::Value> = read_jsonl("/nonexistent/never.jsonl").unwrap();
        assert!(v.is_empty());
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.jsonl");
        std::fs::write(&path, "{\"a\":1}\nnot json\n{\"a\":2}\n").unwrap();
        assert!(read_jsonl::<serde_json::Value>(&path).is_err());
    }

    proptest::proptest! {
        #[test]
        fn floats_survive_the_log_bit_for_bit(xs in proptest::collection::vec(proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL, 1..50)) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("f.jsonl");
            rewrite_jsonl(&path, &xs).unwrap();
            let back: Vec<f64> = read_jsonl(&path).unwrap();
            proptest::prop_assert_eq!(back.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), xs.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        }
    }
}
