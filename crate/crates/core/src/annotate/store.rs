//! Append-only annotation log with an in-memory index.
//!
//! Every state change is one JSON line. The log is fsynced before a call
//! returns, so anything acknowledged survives a restart. Opening a store
//! replays the log to rebuild sessions.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{LabelSchema, TriStateAnnotation};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("annotation log io: {0}")]
    Io(#[from] std::io::Error),
    #[error("annotation log line {line} is corrupt: {message}")]
    Corrupt { line: usize, message: String },
    #[error("a session needs at least one report")]
    EmptySession,
    #[error("unknown report ids: {}", .0.join(", "))]
    UnknownReports(Vec<String>),
    #[error("no session {0:?}")]
    UnknownSession(String),
    #[error("report {report_id:?} is not in session {session_id:?}")]
    NotInSession { session_id: String, report_id: String },
    #[error("annotation is missing labels: {}", .0.join(", "))]
    MissingLabels(Vec<String>),
    #[error("annotation has labels outside the schema: {}", .0.join(", "))]
    UnknownLabels(Vec<String>),
    #[error("session belongs to {expected:?}, not {got:?}")]
    WrongAnnotator { expected: String, got: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportState {
    Pending,
    Done,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnnotationSession {
    pub session_id: String,
    pub annotator_id: String,
    pub queue: Vec<String>,
    pub status: Vec<ReportState>,
    /// Index of the first pending report, or the queue length when none remain.
    pub cursor: usize,
    pub created: u64,
}

impl AnnotationSession {
    fn refresh_cursor(&mut self) {
        self.cursor = self
            .status
            .iter()
            .position(|s| *s == ReportState::Pending)
            .unwrap_or(self.queue.len());
    }

    fn mark(&mut self, report_id: &str, state: ReportState) -> bool {
        let Some(i) = self.queue.iter().position(|r| r == report_id) else {
            return false;
        };
        // a skip never undoes a completed annotation
        if !(state == ReportState::Skipped && self.status[i] == ReportState::Done) {
            self.status[i] = state;
        }
        self.refresh_cursor();
        true
    }

    pub fn next_report(&self) -> Option<&str> {
        self.queue.get(self.cursor).map(String::as_str)
    }

    pub fn count(&self, state: ReportState) -> usize {
        self.status.iter().filter(|s| **s == state).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum LogEvent {
    SessionStarted {
        timestamp: u64,
        session_id: String,
        annotator_id: String,
        report_ids: Vec<String>,
    },
    Annotation {
        timestamp: u64,
        session_id: String,
        annotation: TriStateAnnotation,
    },
    Skipped {
        timestamp: u64,
        session_id: String,
        report_id: String,
    },
}

impl LogEvent {
    fn timestamp(&self) -> u64 {
        match self {
            LogEvent::SessionStarted { timestamp, .. }
            | LogEvent::Annotation { timestamp, .. }
            | LogEvent::Skipped { timestamp, .. } => *timestamp,
        }
    }
}

#[derive(Debug)]
pub struct AnnotationStore {
    path: PathBuf,
    file: File,
    schema: LabelSchema,
    known_reports: Option<BTreeSet<String>>,
    sessions: BTreeMap<String, AnnotationSession>,
    annotations: Vec<TriStateAnnotation>,
    last_timestamp: u64,
}

impl AnnotationStore {
    /// Opens (or creates) the log at `path` and replays it. When
    /// `known_reports` is given, new sessions may only use those ids.
    pub fn open(path: &Path, schema: LabelSchema, known_reports: Option<BTreeSet<String>>) -> Result<Self, StoreError> {
        let mut store = Self {
            path: path.to_path_buf(),
            file: OpenOptions::new().create(true).append(true).open(path)?,
            schema,
            known_reports,
            sessions: BTreeMap::new(),
            annotations: Vec::new(),
            last_timestamp: 0,
        };
        let lines: Vec<String> = BufReader::new(File::open(path)?).lines().collect::<Result<_, _>>()?;
        let total = lines.len();
        for (i, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str::<LogEvent>(line) {
                Ok(event) => store.apply(event),
                // an interrupted final write was never acknowledged
                Err(e) if i + 1 == total && !line.ends_with('}') => {
                    log::warn!("ignoring truncated last line of {}: {e}", path.display());
                }
                Err(e) => {
                    return Err(StoreError::Corrupt {
                        line: i + 1,
                        message: e.to_string(),
                    })
                }
            }
        }
        Ok(store)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn schema(&self) -> &LabelSchema {
        &self.schema
    }

    fn apply(&mut self, event: LogEvent) {
        self.last_timestamp = self.last_timestamp.max(event.timestamp());
        match event {
            LogEvent::SessionStarted {
                timestamp,
                session_id,
                annotator_id,
                report_ids,
            } => {
                let n = report_ids.len();
                let mut s = AnnotationSession {
                    session_id: session_id.clone(),
                    annotator_id,
                    queue: report_ids,
                    status: vec![ReportState::Pending; n],
                    cursor: 0,
                    created: timestamp,
                };
                s.refresh_cursor();
                self.sessions.insert(session_id, s);
            }
            LogEvent::Annotation {
                session_id, annotation, ..
            } => {
                if let Some(s) = self.sessions.get_mut(&session_id) {
                    s.mark(&annotation.report_id, ReportState::Done);
                }
                self.annotations.push(annotation);
            }
            LogEvent::Skipped {
                session_id, report_id, ..
            } => {
                if let Some(s) = self.sessions.get_mut(&session_id) {
                    s.mark(&report_id, ReportState::Skipped);
                }
            }
        }
    }

    fn next_timestamp(&mut self) -> u64 {
        let now = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        self.last_timestamp = now.max(self.last_timestamp + 1);
        self.last_timestamp
    }

    fn append(&mut self, event: LogEvent) -> Result<(), StoreError> {
        let mut line = serde_json::to_string(&event).expect("events serialize");
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.sync_data()?;
        self.apply(event);
        Ok(())
    }

    pub fn start_session(
        &mut self,
        annotator_id: &str,
        report_ids: Vec<String>,
    ) -> Result<AnnotationSession, StoreError> {
        if report_ids.is_empty() {
            return Err(StoreError::EmptySession);
        }
        if let Some(known) = &self.known_reports {
            let unknown: Vec<String> = report_ids.iter().filter(|r| !known.contains(*r)).cloned().collect();
            if !unknown.is_empty() {
                return Err(StoreError::UnknownReports(unknown));
            }
        }
        let session_id = uuid::Uuid::new_v4().to_string();
        let timestamp = self.next_timestamp();
        self.append(LogEvent::SessionStarted {
            timestamp,
            session_id: session_id.clone(),
            annotator_id: annotator_id.to_string(),
            report_ids,
        })?;
        Ok(self.sessions[&session_id].clone())
    }

    pub fn session(&self, session_id: &str) -> Result<&AnnotationSession, StoreError> {
        self.sessions
            .get(session_id)
            .ok_or_else(|| StoreError::UnknownSession(session_id.to_string()))
    }

    pub fn sessions(&self) -> impl Iterator<Item = &AnnotationSession> {
        self.sessions.values()
    }

    /// Logs an annotation; the store assigns its timestamp. An empty
    /// annotator id is filled from the session.
    pub fn submit(&mut self, session_id: &str, mut annotation: TriStateAnnotation) -> Result<u64, StoreError> {
        let session = self.session(session_id)?;
        if !session.queue.contains(&annotation.report_id) {
            return Err(StoreError::NotInSession {
                session_id: session_id.to_string(),
                report_id: annotation.report_id,
            });
        }
        if annotation.annotator_id.is_empty() {
            annotation.annotator_id = session.annotator_id.clone();
        } else if annotation.annotator_id != session.annotator_id {
            return Err(StoreError::WrongAnnotator {
                expected: session.annotator_id.clone(),
                got: annotation.annotator_id,
            });
        }
        let missing = annotation.missing_labels(&self.schema);
        if !missing.is_empty() {
            return Err(StoreError::MissingLabels(missing));
        }
        let unknown = annotation.unknown_labels(&self.schema);
        if !unknown.is_empty() {
            return Err(StoreError::UnknownLabels(unknown));
        }
        let timestamp = self.next_timestamp();
        annotation.timestamp = timestamp;
        self.append(LogEvent::Annotation {
            timestamp,
            session_id: session_id.to_string(),
            annotation,
        })?;
        Ok(timestamp)
    }

    pub fn skip(&mut self, session_id: &str, report_id: &str) -> Result<(), StoreError> {
        if !self.session(session_id)?.queue.iter().any(|r| r == report_id) {
            return Err(StoreError::NotInSession {
                session_id: session_id.to_string(),
                report_id: report_id.to_string(),
            });
        }
        let timestamp = self.next_timestamp();
        self.append(LogEvent::Skipped {
            timestamp,
            session_id: session_id.to_string(),
            report_id: report_id.to_string(),
        })
    }

    /// Every logged annotation in log order.
    pub fn annotations(&self) -> &[TriStateAnnotation] {
        &self.annotations
    }
}
