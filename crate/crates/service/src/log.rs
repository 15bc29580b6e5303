//! Newline-delimited JSON record log, one line per state transition.
//!
//! Each line goes out in a single `write_all` followed by `sync_data`. On
//! open, a trailing line without its newline is a torn write from a crash:
//! it is dropped and the file truncated back to the last complete record.

use std::fs::{File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use foodbench_core::EvalReport;
use serde::{Deserialize, Serialize};

use crate::ServiceError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogRecord {
    Submitted {
        id: u64,
        received_at: DateTime<Utc>,
        results: String,
    },
    Scoring {
        id: u64,
    },
    Scored {
        id: u64,
        report: EvalReport,
    },
    Failed {
        id: u64,
        error: String,
    },
}

impl LogRecord {
    pub fn id(&self) -> u64 {
        match self {
            LogRecord::Submitted { id, .. }
            | LogRecord::Scoring { id }
            | LogRecord::Scored { id, .. }
            | LogRecord::Failed { id, .. } => *id,
        }
    }
}

#[derive(Debug)]
pub struct RecordLog {
    file: File,
    path: PathBuf,
}

impl RecordLog {
    /// Opens (creating if needed) and replays the log. Records come with
    /// their 1-based line numbers.
    pub fn open(path: &Path) -> Result<(Self, Vec<(usize, LogRecord)>), ServiceError> {
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(path)?;
        let mut bytes = Vec::new();
        file.read_to_end(&mut bytes)?;

        let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
        if complete < bytes.len() {
            tracing::warn!(
                path = %path.display(),
                dropped = bytes.len() - complete,
                "discarding torn record at end of log"
            );
            file.set_len(complete as u64)?;
            file.seek(SeekFrom::End(0))?;
        }

        let mut records = Vec::new();
        for (i, line) in bytes[..complete].split(|&b| b == b'\n').enumerate() {
            if line.is_empty() {
                continue;
            }
            let rec = serde_json::from_slice(line).map_err(|e| ServiceError::CorruptLog {
                line: i + 1,
                message: e.to_string(),
            })?;
            records.push((i + 1, rec));
        }
        Ok((
            Self {
                file,
                path: path.to_path_buf(),
            },
            records,
        ))
    }

    pub fn append(&mut self, record: &LogRecord) -> io::Result<()> {
        let mut line = serde_json::to_vec(record).map_err(io::Error::other)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}
