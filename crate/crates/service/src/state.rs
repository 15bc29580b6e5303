use std::collections::BTreeMap;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use foodbench_core::EvalReport;
use serde::{Deserialize, Serialize};

use crate::log::LogRecord;
use crate::ServiceError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Queued,
    Scoring,
    Scored,
    Failed,
}

impl Status {
    pub fn is_terminal(self) -> bool {
        matches!(self, Status::Scored | Status::Failed)
    }
}

/// Public view of a submission. `scored` implies `report`, `failed`
/// implies `error`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmissionRecord {
    pub id: u64,
    pub received_at: DateTime<Utc>,
    pub status: Status,
    /// Size of the stored results document.
    pub results_bytes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<EvalReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub submission_id: u64,
    #[serde(rename = "mAP")]
    pub map: f64,
    #[serde(rename = "mAR")]
    pub mar: f64,
    pub rank: usize,
}

/// mAP descending, then mAR descending, then earlier id.
pub fn rank_entries(scored: impl IntoIterator<Item = (u64, f64, f64)>) -> Vec<LeaderboardEntry> {
    let mut rows: Vec<(u64, f64, f64)> = scored.into_iter().collect();
    rows.sort_by(|a, b| b.1.total_cmp(&a.1).then(b.2.total_cmp(&a.2)).then(a.0.cmp(&b.0)));
    rows.into_iter()
        .enumerate()
        .map(|(i, (submission_id, map, mar))| LeaderboardEntry {
            submission_id,
            map,
            mar,
            rank: i + 1,
        })
        .collect()
}

#[derive(Debug)]
pub(crate) struct Entry {
    pub record: SubmissionRecord,
    /// Kept until the submission reaches a terminal state.
    pub results: Option<Arc<str>>,
}

#[derive(Debug, Default)]
pub(crate) struct State {
    pub entries: BTreeMap<u64, Entry>,
    pub next_id: u64,
}

impl State {
    pub fn apply(&mut self, rec: LogRecord) -> Result<(), ServiceError> {
        let id = rec.id();
        if let LogRecord::Submitted {
            id,
            received_at,
            results,
        } = rec
        {
            if id < self.next_id {
                return Err(ServiceError::CorruptLog {
                    line: 0,
                    message: format!("submission id {id} is not increasing"),
                });
            }
            self.next_id = id + 1;
            self.entries.insert(
                id,
                Entry {
                    record: SubmissionRecord {
                        id,
                        received_at,
                        status: Status::Queued,
                        results_bytes: results.len(),
                        report: None,
                        error: None,
                    },
                    results: Some(results.into()),
                },
            );
            return Ok(());
        }
        let entry = self.entries.get_mut(&id).ok_or(ServiceError::CorruptLog {
            line: 0,
            message: format!("transition for unknown submission {id}"),
        })?;
        match rec {
            LogRecord::Scoring { .. } => entry.record.status = Status::Scoring,
            LogRecord::Scored { report, .. } => {
                entry.record.status = Status::Scored;
                entry.record.report = Some(report);
                entry.results = None;
            }
            LogRecord::Failed { error, .. } => {
                entry.record.status = Status::Failed;
                entry.record.error = Some(error);
                entry.results = None;
            }
            LogRecord::Submitted { .. } => unreachable!("handled above"),
        }
        Ok(())
    }

    pub fn pending(&self) -> usize {
        self.entries
            .values()
            .filter(|e| !e.record.status.is_terminal())
            .count()
    }

    pub fn leaderboard(&self) -> Vec<LeaderboardEntry> {
        rank_entries(self.entries.values().filter_map(|e| {
            let r = e.record.report.as_ref()?;
            Some((e.record.id, r.map, r.mar))
        }))
    }
}
