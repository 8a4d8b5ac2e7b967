use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use rubric_bn::CellRef;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("malformed request: {0}")]
    BadRequest(String),

    #[error("{0}")]
    NotFound(String),

    #[error("{message}")]
    Conflict { message: String, cells: Vec<CellRef> },

    #[error("{0}")]
    Unprocessable(String),

    #[error("storage failure: {0}")]
    Storage(String),
}

/// JSON body of every error response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cells: Vec<CellRef>,
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Conflict { .. } => StatusCode::CONFLICT,
            ServiceError::Unprocessable(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    fn code(&self) -> &'static str {
        match self {
            ServiceError::BadRequest(_) => "bad_request",
            ServiceError::NotFound(_) => "not_found",
            ServiceError::Conflict { .. } => "conflict",
            ServiceError::Unprocessable(_) => "validation",
            ServiceError::Storage(_) => "storage",
        }
    }
}

impl From<rubric_bn::Error> for ServiceError {
    fn from(err: rubric_bn::Error) -> Self {
        use rubric_bn::Error as E;
        match err {
            E::Encoding { ref cells, .. } | E::ImpossibleEvidence { ref cells } => ServiceError::Conflict {
                message: err.to_string(),
                cells: cells.clone(),
            },
            E::Io { .. } => ServiceError::Storage(err.to_string()),
            E::Parse { .. } => ServiceError::BadRequest(err.to_string()),
            other => ServiceError::Unprocessable(other.to_string()),
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = self.status();
        if status.is_server_error() {
            log::error!("{self}");
        }
        let cells = match &self {
            ServiceError::Conflict { cells, .. } => cells.clone(),
            _ => Vec::new(),
        };
        let body = ErrorBody {
            error: self.code().to_owned(),
            message: self.to_string(),
            cells,
        };
        (status, Json(body)).into_response()
    }
}
