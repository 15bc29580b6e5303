//! Submission scoring service: results documents are accepted over HTTP,
//! scored asynchronously against a fixed ground truth and ranked on a
//! leaderboard. All state is derived from an append-only record log, so a
//! restarted process resumes exactly where the previous one stopped.

mod http;
pub mod log;
mod state;

pub use http::{router, serve};
pub use log::{LogRecord, RecordLog};
pub use state::{rank_entries, LeaderboardEntry, Status, SubmissionRecord};

use std::io;
use std::path::Path;
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use chrono::Utc;
use foodbench_core::coco::parse_results;
use foodbench_core::{evaluate, DatasetDoc, EvalReport, MatchConfig};
use thiserror::Error;
use tokio::sync::{watch, Semaphore};

use state::State;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("payload of {size} bytes exceeds the {limit}-byte limit")]
    PayloadTooLarge { size: usize, limit: usize },
    #[error("submission {0} not found")]
    NotFound(u64),
    #[error("log line {line} is corrupt: {message}")]
    CorruptLog { line: usize, message: String },
    #[error("invalid match config: {0}")]
    Config(String),
    #[error("log I/O: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy)]
pub struct ServiceOptions {
    /// Submissions scored at the same time.
    pub workers: usize,
    pub max_payload_bytes: usize,
    pub scoring_timeout: Duration,
}

impl Default for ServiceOptions {
    fn default() -> Self {
        Self {
            workers: 2,
            max_payload_bytes: 256 << 20,
            scoring_timeout: Duration::from_secs(600),
        }
    }
}

struct Inner {
    gt: Arc<DatasetDoc>,
    match_config: MatchConfig,
    options: ServiceOptions,
    /// Held across the append and the state update, so state order equals
    /// log order.
    log: Mutex<RecordLog>,
    state: RwLock<State>,
    permits: Arc<Semaphore>,
    pending: watch::Sender<usize>,
}

#[derive(Clone)]
pub struct Service {
    inner: Arc<Inner>,
}

impl Service {
    /// Replays the log at `log_path` and re-queues every submission that
    /// had not reached a terminal state. Must run inside a Tokio runtime.
    pub async fn open(
        gt: DatasetDoc,
        match_config: MatchConfig,
        log_path: &Path,
        options: ServiceOptions,
    ) -> Result<Self, ServiceError> {
        match_config
            .validate()
            .map_err(|e| ServiceError::Config(e.to_string()))?;
        let (log, records) = RecordLog::open(log_path)?;
        let mut state = State::default();
        for (line, rec) in records {
            state.apply(rec).map_err(|e| match e {
                ServiceError::CorruptLog { message, .. } => ServiceError::CorruptLog { line, message },
                other => other,
            })?;
        }
        let unfinished: Vec<(u64, Arc<str>)> = state
            .entries
            .values()
            .filter(|e| !e.record.status.is_terminal())
            .filter_map(|e| Some((e.record.id, e.results.clone()?)))
            .collect();
        for (id, _) in &unfinished {
            if let Some(e) = state.entries.get_mut(id) {
                e.record.status = Status::Queued;
            }
        }
        tracing::info!(
            path = %log_path.display(),
            submissions = state.entries.len(),
            requeued = unfinished.len(),
            "log replayed"
        );
        let (pending, _) = watch::channel(state.pending());
        let svc = Self {
            inner: Arc::new(Inner {
                gt: Arc::new(gt),
                match_config,
                options,
                log: Mutex::new(log),
                state: RwLock::new(state),
                permits: Arc::new(Semaphore::new(options.workers.max(1))),
                pending,
            }),
        };
        for (id, results) in unfinished {
            svc.spawn_scoring(id, results);
        }
        Ok(svc)
    }

    pub fn options(&self) -> &ServiceOptions {
        &self.inner.options
    }

    /// Persists the document and queues it for scoring. Parse errors are
    /// not reported here; they surface as a failed submission.
    pub fn submit(&self, results: &[u8]) -> Result<u64, ServiceError> {
        let limit = self.inner.options.max_payload_bytes;
        if results.len() > limit {
            return Err(ServiceError::PayloadTooLarge {
                size: results.len(),
                limit,
            });
        }
        let text: Arc<str> = String::from_utf8_lossy(results).into();
        let id = {
            let mut log = self.inner.log.lock().expect("log lock");
            let mut state = self.inner.state.write().expect("state lock");
            let id = state.next_id.max(1);
            let rec = LogRecord::Submitted {
                id,
                received_at: Utc::now(),
                results: text.to_string(),
            };
            log.append(&rec)?;
            state.apply(rec)?;
            self.inner.pending.send_replace(state.pending());
            id
        };
        tracing::info!(id, bytes = results.len(), "submission queued");
        self.spawn_scoring(id, text);
        Ok(id)
    }

    pub fn get_submission(&self, id: u64) -> Result<SubmissionRecord, ServiceError> {
        let state = self.inner.state.read().expect("state lock");
        state
            .entries
            .get(&id)
            .map(|e| e.record.clone())
            .ok_or(ServiceError::NotFound(id))
    }

    pub fn leaderboard(&self) -> Vec<LeaderboardEntry> {
        self.inner.state.read().expect("state lock").leaderboard()
    }

    /// Waits until no submission is queued or being scored.
    pub async fn wait_idle(&self) {
        let mut rx = self.inner.pending.subscribe();
        // the sender lives in `inner`, which `self` keeps alive
        let _ = rx.wait_for(|&n| n == 0).await;
    }

    fn transition(&self, rec: LogRecord) -> Result<(), ServiceError> {
        let mut log = self.inner.log.lock().expect("log lock");
        let mut state = self.inner.state.write().expect("state lock");
        log.append(&rec)?;
        state.apply(rec)?;
        self.inner.pending.send_replace(state.pending());
        Ok(())
    }

    fn spawn_scoring(&self, id: u64, results: Arc<str>) {
        let svc = self.clone();
        tokio::spawn(async move {
            let _permit = svc
                .inner
                .permits
                .clone()
                .acquire_owned()
                .await
                .expect("semaphore is never closed");
            if let Err(e) = svc.transition(LogRecord::Scoring { id }) {
                tracing::error!(id, error = %e, "could not record scoring start");
                return;
            }
            let gt = svc.inner.gt.clone();
            let cfg = svc.inner.match_config;
            let limit = svc.inner.options.scoring_timeout;
            // a timed-out job keeps its blocking thread until it finishes
            let job = tokio::task::spawn_blocking(move || score(&gt, results.as_bytes(), &cfg));
            let outcome = match tokio::time::timeout(limit, job).await {
                Ok(Ok(Ok(report))) => LogRecord::Scored { id, report },
                Ok(Ok(Err(error))) => LogRecord::Failed { id, error },
                Ok(Err(join)) => LogRecord::Failed {
                    id,
                    error: format!("scoring aborted: {join}"),
                },
                Err(_) => LogRecord::Failed {
                    id,
                    error: format!("scoring took longer than the allowed {}s", limit.as_secs()),
                },
            };
            match &outcome {
                LogRecord::Scored { report, .. } => {
                    tracing::info!(id, map = report.map, mar = report.mar, "submission scored")
                }
                LogRecord::Failed { error, .. } => tracing::warn!(id, %error, "submission failed"),
                _ => {}
            }
            if let Err(e) = svc.transition(outcome) {
                tracing::error!(id, error = %e, "could not record scoring outcome");
            }
        });
    }
}

fn score(gt: &DatasetDoc, results: &[u8], cfg: &MatchConfig) -> Result<EvalReport, String> {
    let dets = parse_results(results).map_err(|e| format!("ParseError: {e}"))?;
    evaluate(gt, &dets, cfg).map_err(|e| format!("EvalError: {e}"))
}
