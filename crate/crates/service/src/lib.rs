//! HTTP service for live assessment sessions over compiled rubric networks.
//!
//! Every session is an append-only event log; posteriors are recomputed from
//! the evidence the log folds to. With a data directory, models and session
//! logs survive restarts.

pub mod api;
pub mod error;
pub mod model;
pub mod session;
pub mod state;

use std::net::SocketAddr;
use std::sync::Arc;

pub use api::{router, NextTasks, SessionCreated, SessionLog, SessionReport, WhatIfReport};
pub use error::{ErrorBody, ServiceError};
pub use model::{Model, ModelDoc, ModelSummary};
pub use session::{LogEntry, Observation, ObservationKind, Session, SessionEvent, SessionHeader, SessionStatus};
pub use state::AppState;

/// Serves until ctrl-c.
pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
            log::info!("shutting down");
        })
        .await
}
