use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use doci::DociError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Result<T> = std::result::Result<T, ServiceError>;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Doci(#[from] DociError),

    #[error("an imaging sequence is running")]
    ImagingInProgress,

    #[error("no imaging data yet; run an imaging sequence first")]
    NoImagingData,

    #[error("{0}")]
    NotFound(String),

    #[error("{0}")]
    BadRequest(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("background task failed: {0}")]
    Task(String),
}

/// Wire form of every error, for both HTTP bodies and CLI stderr.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::Doci(e) => e.code(),
            ServiceError::ImagingInProgress => "ImagingInProgress",
            ServiceError::NoImagingData => "NoImagingData",
            ServiceError::NotFound(_) => "NotFound",
            ServiceError::BadRequest(_) => "BadRequest",
            ServiceError::Io(_) => "Io",
            ServiceError::Json(_) => "Json",
            ServiceError::Task(_) => "Task",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::ImagingInProgress | ServiceError::NoImagingData => StatusCode::CONFLICT,
            ServiceError::NotFound(_) | ServiceError::Doci(DociError::UnknownChannel(_)) => {
                StatusCode::NOT_FOUND
            }
            ServiceError::BadRequest(_) | ServiceError::Json(_) => StatusCode::BAD_REQUEST,
            ServiceError::Doci(DociError::Io(_) | DociError::Image(_))
            | ServiceError::Io(_)
            | ServiceError::Task(_) => StatusCode::INTERNAL_SERVER_ERROR,
            ServiceError::Doci(_) => StatusCode::BAD_REQUEST,
        }
    }

    pub fn body(&self) -> ErrorBody {
        ErrorBody {
            code: self.code().to_string(),
            message: self.to_string(),
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        (self.status(), Json(self.body())).into_response()
    }
}
