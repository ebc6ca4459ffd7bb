//! Timestamped event lines, one per event.

use std::io::Write;
use std::sync::{Arc, Mutex};

use chrono::{DateTime, SecondsFormat};

pub trait LogSink: Send {
    fn line(&mut self, line: &str);
}

/// Formats `msg` with an ISO-8601 UTC prefix, e.g.
/// `2022-03-15T22:00:00Z ...recovered`.
pub fn format_line(epoch_millis: i64, msg: &str) -> String {
    let stamp = DateTime::from_timestamp_millis(epoch_millis)
        .map(|t| t.to_rfc3339_opts(SecondsFormat::Secs, true))
        .unwrap_or_else(|| epoch_millis.to_string());
    format!("{stamp} {msg}")
}

#[derive(Debug, Default)]
pub struct StderrLog;

impl LogSink for StderrLog {
    fn line(&mut self, line: &str) {
        let _ = writeln!(std::io::stderr().lock(), "{line}");
    }
}

/// Keeps every line in memory; clones share the same buffer.
#[derive(Debug, Clone, Default)]
pub struct MemoryLog {
    lines: Arc<Mutex<Vec<String>>>,
}

impl MemoryLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn lines(&self) -> Vec<String> {
        self.lines.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

impl LogSink for MemoryLog {
    fn line(&mut self, line: &str) {
        self.lines.lock().unwrap_or_else(|e| e.into_inner()).push(line.to_owned());
    }
}
