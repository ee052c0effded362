//! NDJSON event logs: one header line, then one event per line.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::EngineConfig;
use crate::events::{Event, EventBody, LOG_SCHEMA_VERSION};
use crate::gateway::{BackendKind, ModelExchange, Script};
use crate::scenario::Scenario;

#[derive(Debug, Error)]
pub enum LogError {
    #[error("log I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("log line {line}: {message}")]
    Json { line: usize, message: String },
    #[error("log schema_version {found} is not supported (expected {expected})")]
    Schema { found: u32, expected: u32 },
    #[error("log is empty")]
    Empty,
    #[error("log is missing sequence number {expected} (line {line} has seq {found})")]
    MissingSeq { expected: u64, found: u64, line: usize },
}

/// Everything needed to re-simulate a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub schema_version: u32,
    pub seed: u64,
    /// Ticks stepped by the run.
    pub ticks: u64,
    pub gateway: BackendKind,
    /// Whether start/end measurement interviews were run.
    pub measure: bool,
    pub keep_prompts: bool,
    pub config: EngineConfig,
    pub scenario: Scenario,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub script: Option<Script>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    pub header: LogHeader,
    pub events: Vec<Event>,
}

impl EventLog {
    pub fn write_to(&self, mut w: impl Write) -> Result<(), LogError> {
        serde_json::to_writer(&mut w, &self.header).map_err(|e| LogError::Json {
            line: 1,
            message: e.to_string(),
        })?;
        w.write_all(b"\n")?;
        for (i, e) in self.events.iter().enumerate() {
            serde_json::to_writer(&mut w, e).map_err(|err| LogError::Json {
                line: i + 2,
                message: err.to_string(),
            })?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_ndjson(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }

    pub fn save(&self, path: &Path) -> Result<(), LogError> {
        let f = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn read_from(r: impl BufRead) -> Result<Self, LogError> {
        let mut lines = r.lines();
        let first = lines.next().ok_or(LogError::Empty)??;
        let raw: serde_json::Value = serde_json::from_str(&first).map_err(|e| LogError::Json {
            line: 1,
            message: e.to_string(),
        })?;
        let found = raw.get("schema_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if found != LOG_SCHEMA_VERSION {
            return Err(LogError::Schema {
                found,
                expected: LOG_SCHEMA_VERSION,
            });
        }
        let header: LogHeader = serde_json::from_value(raw).map_err(|e| LogError::Json {
            line: 1,
            message: e.to_string(),
        })?;
        let mut events = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let e: Event = serde_json::from_str(&line).map_err(|err| LogError::Json {
                line: i + 2,
                message: err.to_string(),
            })?;
            let expected = events.len() as u64;
            if e.seq != expected {
                return Err(LogError::MissingSeq {
                    expected,
                    found: e.seq,
                    line: i + 2,
                });
            }
            events.push(e);
        }
        Ok(Self { header, events })
    }

    pub fn parse(text: &str) -> Result<Self, LogError> {
        Self::read_from(text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self, LogError> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }

    /// Recorded model exchanges, in log order.
    pub fn exchanges(&self) -> impl Iterator<Item = &ModelExchange> {
        self.events.iter().filter_map(|e| match &e.body {
            EventBody::ModelExchangeRef { exchange } => Some(exchange),
            _ => None,
        })
    }
}
