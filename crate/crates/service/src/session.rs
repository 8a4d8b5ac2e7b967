//! Live assessment sessions as append-only event logs.
//!
//! The evidence of a session is never stored directly: it is the fold of its
//! log, where each observation pushes a new evidence snapshot and each undo
//! pops the latest one. Replaying a log therefore rebuilds the exact state.

use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use rubric_bn::evidence::encode_task;
use rubric_bn::{infer, suggest, EvidenceSet, LevelCoord, PosteriorReport, TaskGain, TaskId, TaskObservation};
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;
use crate::model::Model;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationKind {
    Achieved,
    Obs,
}

/// One assessor input: an achieved level, or a single explicit cell outcome.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Observation {
    pub task: TaskId,
    pub kind: ObservationKind,
    pub r: usize,
    pub c: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<u8>,
}

impl Observation {
    pub fn achieved(task: impl Into<TaskId>, r: usize, c: usize) -> Self {
        Observation {
            task: task.into(),
            kind: ObservationKind::Achieved,
            r,
            c,
            value: None,
        }
    }

    pub fn cell(task: impl Into<TaskId>, r: usize, c: usize, value: bool) -> Self {
        Observation {
            task: task.into(),
            kind: ObservationKind::Obs,
            r,
            c,
            value: Some(u8::from(value)),
        }
    }

    fn to_task_observation(&self) -> Result<TaskObservation, ServiceError> {
        let coord = LevelCoord::new(self.r, self.c);
        match (self.kind, self.value) {
            (ObservationKind::Achieved, None) => Ok(TaskObservation::Achieved { level: coord }),
            (ObservationKind::Achieved, Some(_)) => Err(ServiceError::Unprocessable(
                "achieved observations carry no value".into(),
            )),
            (ObservationKind::Obs, Some(v @ (0 | 1))) => Ok(TaskObservation::Explicit {
                cells: vec![(coord, v == 1)],
            }),
            (ObservationKind::Obs, other) => Err(ServiceError::Unprocessable(format!(
                "obs observations need value 0 or 1, got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SessionEvent {
    Observation { observation: Observation },
    Undo,
    Close,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    pub at: DateTime<Utc>,
    #[serde(flatten)]
    pub event: SessionEvent,
}

/// First line of a session file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionHeader {
    pub session: String,
    pub model: String,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Active,
    Closed,
}

#[derive(Debug)]
pub struct Session {
    header: SessionHeader,
    model: Arc<Model>,
    log: Vec<LogEntry>,
    /// Evidence after each observation still in effect.
    snapshots: Vec<EvidenceSet>,
    status: SessionStatus,
    journal: Option<PathBuf>,
}

impl Session {
    pub fn new(header: SessionHeader, model: Arc<Model>) -> Self {
        Session {
            header,
            model,
            log: Vec::new(),
            snapshots: Vec::new(),
            status: SessionStatus::Active,
            journal: None,
        }
    }

    /// Creates the session file and writes the header line.
    pub fn with_journal(mut self, path: PathBuf) -> Result<Self, ServiceError> {
        let line = serde_json::to_string(&self.header).expect("header serializes");
        write_line(&path, &line, true)?;
        self.journal = Some(path);
        Ok(self)
    }

    /// Rebuilds a session from its log. Every entry must apply cleanly.
    pub fn replay(header: SessionHeader, model: Arc<Model>, entries: &[LogEntry]) -> Result<Self, ServiceError> {
        let mut session = Session::new(header, model);
        for entry in entries {
            session.apply(&entry.event).map_err(|e| {
                ServiceError::Storage(format!(
                    "session {} event {} does not replay: {e}",
                    session.header.session, entry.seq
                ))
            })?;
            session.log.push(entry.clone());
        }
        Ok(session)
    }

    /// Loads a session file written by [`Session::with_journal`]. A torn
    /// final line, left by a crash mid-write, is dropped with a warning.
    pub fn load(path: &Path, model_for: impl Fn(&str) -> Option<Arc<Model>>) -> Result<Self, ServiceError> {
        let storage = |e: std::io::Error| ServiceError::Storage(format!("{}: {e}", path.display()));
        let file = fs::File::open(path).map_err(storage)?;
        let lines: Vec<String> = BufReader::new(file)
            .lines()
            .collect::<Result<_, _>>()
            .map_err(storage)?;
        let corrupt = |n: usize, e: serde_json::Error| ServiceError::Storage(format!("{}:{n}: {e}", path.display()));
        let (first, rest) = lines
            .split_first()
            .ok_or_else(|| ServiceError::Storage(format!("{}: empty session file", path.display())))?;
        let header: SessionHeader = serde_json::from_str(first).map_err(|e| corrupt(1, e))?;
        let model = model_for(&header.model)
            .ok_or_else(|| ServiceError::Storage(format!("{}: unknown model {}", path.display(), header.model)))?;
        let mut entries = Vec::with_capacity(rest.len());
        for (i, line) in rest.iter().enumerate() {
            match serde_json::from_str::<LogEntry>(line) {
                Ok(entry) => entries.push(entry),
                Err(e) if i + 1 == rest.len() => log::warn!("{}: dropping torn final line: {e}", path.display()),
                Err(e) => return Err(corrupt(i + 2, e)),
            }
        }
        let mut session = Session::replay(header, model, &entries)?;
        session.journal = Some(path.to_owned());
        Ok(session)
    }

    pub fn id(&self) -> &str {
        &self.header.session
    }

    pub fn header(&self) -> &SessionHeader {
        &self.header
    }

    pub fn model(&self) -> &Arc<Model> {
        &self.model
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn evidence(&self) -> EvidenceSet {
        self.snapshots.last().cloned().unwrap_or_default()
    }

    /// Evidence after adding `observation`, checked for dominance
    /// consistency and non-zero probability.
    pub fn evidence_with(&self, observation: &Observation) -> Result<EvidenceSet, ServiceError> {
        if !self.model.network.has_task(&observation.task) {
            return Err(ServiceError::Unprocessable(format!(
                "unknown task '{}'",
                observation.task
            )));
        }
        let added = encode_task(
            &self.model.design.rubric,
            &observation.task,
            &observation.to_task_observation()?,
        )?;
        let evidence = self.evidence().merged(&self.model.design.rubric, &added)?;
        infer(&self.model.network, &evidence)?;
        Ok(evidence)
    }

    fn apply(&mut self, event: &SessionEvent) -> Result<(), ServiceError> {
        if self.status == SessionStatus::Closed {
            return Err(ServiceError::Conflict {
                message: format!("session {} is closed", self.id()),
                cells: Vec::new(),
            });
        }
        match event {
            SessionEvent::Observation { observation } => {
                let evidence = self.evidence_with(observation)?;
                self.snapshots.push(evidence);
            }
            SessionEvent::Undo => {
                if self.snapshots.pop().is_none() {
                    return Err(ServiceError::Conflict {
                        message: "no observation to undo".into(),
                        cells: Vec::new(),
                    });
                }
            }
            SessionEvent::Close => self.status = SessionStatus::Closed,
        }
        Ok(())
    }

    /// Validates, journals and applies one event. Nothing changes if any
    /// step fails.
    pub fn record(&mut self, event: SessionEvent, at: DateTime<Utc>) -> Result<&LogEntry, ServiceError> {
        let saved = (self.snapshots.clone(), self.status);
        self.apply(&event)?;
        let entry = LogEntry {
            seq: self.log.len() as u64 + 1,
            at,
            event,
        };
        if let Some(path) = &self.journal {
            let line = serde_json::to_string(&entry).expect("log entry serializes");
            if let Err(e) = write_line(path, &line, false) {
                (self.snapshots, self.status) = saved;
                return Err(e);
            }
        }
        self.log.push(entry);
        Ok(self.log.last().expect("just pushed"))
    }

    pub fn report(&self) -> Result<PosteriorReport, ServiceError> {
        Ok(infer(&self.model.network, &self.evidence())?)
    }

    pub fn whatif(&self, observation: &Observation) -> Result<PosteriorReport, ServiceError> {
        Ok(infer(&self.model.network, &self.evidence_with(observation)?)?)
    }

    pub fn next_tasks(&self) -> Result<Vec<TaskGain>, ServiceError> {
        Ok(suggest(
            &self.model.design.rubric,
            &self.model.network,
            &self.evidence(),
        )?)
    }
}

fn write_line(path: &Path, line: &str, create_new: bool) -> Result<(), ServiceError> {
    let storage = |e: std::io::Error| ServiceError::Storage(format!("{}: {e}", path.display()));
    let mut file = if create_new {
        OpenOptions::new().write(true).create_new(true).open(path)
    } else {
        OpenOptions::new().append(true).open(path)
    }
    .map_err(storage)?;
    file.write_all(format!("{line}\n").as_bytes()).map_err(storage)?;
    file.sync_data().map_err(storage)
}
