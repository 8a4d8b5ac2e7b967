use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use rubric_bn::{probabilistic_score, PosteriorReport, TaskGain, TaskId};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;
use crate::model::{ModelDoc, ModelSummary};
use crate::session::{LogEntry, Observation, ObservationKind, Session, SessionEvent, SessionStatus};
use crate::state::AppState;

type ApiResult<T> = Result<T, ServiceError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSession {
    pub model_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub model_id: String,
    pub created_at: DateTime<Utc>,
}

/// Posterior state of a session, returned by every endpoint that reports one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub session_id: String,
    pub status: SessionStatus,
    /// Number of log entries behind this report.
    pub events: usize,
    pub report: PosteriorReport,
    pub probabilistic_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIfReport {
    pub session_id: String,
    pub observation: Observation,
    pub report: PosteriorReport,
    pub probabilistic_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextTasks {
    pub session_id: String,
    pub ranked: Vec<TaskGain>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub session_id: String,
    pub model_id: String,
    pub status: SessionStatus,
    pub created_at: DateTime<Utc>,
    pub events: Vec<LogEntry>,
}

#[derive(Debug, Deserialize)]
pub struct WhatIfQuery {
    pub task: String,
    pub r: usize,
    pub c: usize,
    pub value: Option<u8>,
    pub kind: Option<ObservationKind>,
}

impl From<WhatIfQuery> for Observation {
    fn from(q: WhatIfQuery) -> Self {
        let kind = q.kind.unwrap_or(if q.value.is_some() {
            ObservationKind::Obs
        } else {
            ObservationKind::Achieved
        });
        Observation {
            task: TaskId::new(q.task),
            kind,
            r: q.r,
            c: q.c,
            value: q.value,
        }
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/models", post(create_model))
        .route("/models/{id}", get(get_model))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/observations", post(add_observation))
        .route("/sessions/{id}/observations/latest", delete(undo_observation))
        .route("/sessions/{id}/posteriors", get(posteriors))
        .route("/sessions/{id}/whatif", get(whatif))
        .route("/sessions/{id}/next-task", get(next_task))
        .route("/sessions/{id}/log", get(session_log))
        .route("/sessions/{id}/close", post(close_session))
        .with_state(state)
}

/// Bodies are decoded by hand so that any malformed JSON maps to 400.
fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ServiceError::BadRequest(e.to_string()))
}

fn session_report(session: &Session) -> ApiResult<SessionReport> {
    let report = session.report()?;
    Ok(SessionReport {
        session_id: session.id().to_owned(),
        status: session.status(),
        events: session.log().len(),
        probabilistic_score: probabilistic_score(&report).0,
        report,
    })
}

async fn create_model(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult<(StatusCode, Json<ModelSummary>)> {
    let doc: ModelDoc = parse_body(&body)?;
    let (model, created) = state.register_model(doc)?;
    let status = if created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(model.summary())))
}

async fn get_model(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<ModelSummary>> {
    Ok(Json(state.model(&id)?.summary()))
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<SessionCreated>)> {
    let req: CreateSession = parse_body(&body)?;
    let session = state.create_session(&req.model_id)?;
    let session = session.read().expect("session lock poisoned");
    let header = session.header();
    let created = SessionCreated {
        session_id: header.session.clone(),
        model_id: header.model.clone(),
        created_at: header.created_at,
    };
    Ok((StatusCode::CREATED, Json(created)))
}

async fn add_observation(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<SessionReport>> {
    let observation: Observation = parse_body(&body)?;
    let handle = state.session(&id)?;
    let mut session = handle.write().expect("session lock poisoned");
    session.record(SessionEvent::Observation { observation }, Utc::now())?;
    Ok(Json(session_report(&session)?))
}

async fn undo_observation(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<Json<SessionReport>> {
    let handle = state.session(&id)?;
    let mut session = handle.write().expect("session lock poisoned");
    session.record(SessionEvent::Undo, Utc::now())?;
    Ok(Json(session_report(&session)?))
}

async fn close_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<SessionReport>> {
    let handle = state.session(&id)?;
    let mut session = handle.write().expect("session lock poisoned");
    session.record(SessionEvent::Close, Utc::now())?;
    Ok(Json(session_report(&session)?))
}

async fn posteriors(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<SessionReport>> {
    let handle = state.session(&id)?;
    let session = handle.read().expect("session lock poisoned");
    Ok(Json(session_report(&session)?))
}

async fn whatif(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(query): Query<WhatIfQuery>,
) -> ApiResult<Json<WhatIfReport>> {
    let observation = Observation::from(query);
    let handle = state.session(&id)?;
    let session = handle.read().expect("session lock poisoned");
    let report = session.whatif(&observation)?;
    Ok(Json(WhatIfReport {
        session_id: id,
        observation,
        probabilistic_score: probabilistic_score(&report).0,
        report,
    }))
}

async fn next_task(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<NextTasks>> {
    let handle = state.session(&id)?;
    let session = handle.read().expect("session lock poisoned");
    Ok(Json(NextTasks {
        session_id: id,
        ranked: session.next_tasks()?,
    }))
}

async fn session_log(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<SessionLog>> {
    let handle = state.session(&id)?;
    let session = handle.read().expect("session lock poisoned");
    let header = session.header();
    Ok(Json(SessionLog {
        session_id: header.session.clone(),
        model_id: header.model.clone(),
        status: session.status(),
        created_at: header.created_at,
        events: session.log().to_vec(),
    }))
}
