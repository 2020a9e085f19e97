use std::collections::HashSet;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use uuid::Uuid;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Ok,
    Error,
    /// The endpoint refused both the primary and the fallback temperature.
    RejectedTemperature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptTrace {
    pub attempt: u32,
    pub temperature: f64,
    pub outcome: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub http_status: Option<u16>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceRecord {
    pub request_id: Uuid,
    pub image_id: String,
    pub reader_id: Option<String>,
    pub task: String,
    pub gaze_mode: String,
    /// Hex SHA-256 of the serialized request body at the initial temperature.
    pub request_digest: String,
    pub response_text: String,
    pub status: RecordStatus,
    /// Set when the request only succeeded after falling back to the
    /// secondary temperature.
    #[serde(default)]
    pub temperature_fallback: bool,
    pub latency_ms: u64,
    pub attempt_count: u32,
    pub attempts: Vec<AttemptTrace>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub timestamp: DateTime<Utc>,
}

pub fn request_digest(body: &[u8]) -> String {
    hex::encode(Sha256::digest(body))
}

/// Append-only JSONL file of [`InferenceRecord`]s.
#[derive(Debug, Clone)]
pub struct RecordStore {
    path: PathBuf,
}

impl RecordStore {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn io(&self, source: std::io::Error) -> Error {
        Error::Io { path: self.path.clone(), source }
    }

    /// Every parseable record. A torn final line (from an interrupted
    /// writer) is ignored; malformed lines elsewhere are errors.
    pub fn load(&self) -> Result<Vec<InferenceRecord>> {
        let file = match File::open(&self.path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(self.io(e)),
        };
        let lines: Vec<String> = BufReader::new(file)
            .lines()
            .collect::<std::io::Result<_>>()
            .map_err(|e| self.io(e))?;
        let last = lines.len().saturating_sub(1);
        let mut records = Vec::with_capacity(lines.len());
        for (i, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(line) {
                Ok(r) => records.push(r),
                Err(e) if i == last => {
                    log::warn!("{}: ignoring torn final line: {e}", self.path.display());
                }
                Err(e) => return Err(e.into()),
            }
        }
        Ok(records)
    }

    /// Digests of requests that already have an `ok` record.
    pub fn completed_digests(&self) -> Result<HashSet<String>> {
        Ok(self
            .load()?
            .into_iter()
            .filter(|r| r.status == RecordStatus::Ok)
            .map(|r| r.request_digest)
            .collect())
    }

    /// Removes any existing records.
    pub fn truncate(&self) -> Result<()> {
        match fs::remove_file(&self.path) {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(()),
            Err(e) => Err(self.io(e)),
        }
    }

    pub(crate) fn open_append(&self) -> Result<RecordWriter> {
        if let Some(dir) = self.path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| self.io(e))?;
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| self.io(e))?;
        // drop a torn final line left by an interrupted writer
        let content = fs::read(&self.path).map_err(|e| self.io(e))?;
        let keep = content.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
        if keep < content.len() {
            log::warn!("{}: truncating torn final line", self.path.display());
            file.set_len(keep as u64).map_err(|e| self.io(e))?;
        }
        Ok(RecordWriter { file, path: self.path.clone() })
    }
}

pub(crate) struct RecordWriter {
    file: File,
    path: PathBuf,
}

impl RecordWriter {
    pub(crate) fn append(&mut self, record: &InferenceRecord) -> Result<()> {
        let mut line = serde_json::to_vec(record)?;
        line.push(b'\n');
        self.file
            .write_all(&line)
            .and_then(|_| self.file.flush())
            .map_err(|source| Error::Io { path: self.path.clone(), source })
    }
}
