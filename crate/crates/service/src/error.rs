use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("image could not be decoded: {0}")]
    BadImage(String),
    #[error("{0} not found")]
    NotFound(String),
    #[error("corrected caption is empty")]
    EmptyCaption,
    #[error("learner has not been trained yet")]
    Untrained,
    #[error("feedback queue is empty")]
    EmptyQueue,
    #[error("no further tasks to adapt")]
    NoTasks,
    #[error("an update is already in progress")]
    Busy,
    #[error(transparent)]
    Core(#[from] loopcap_core::Error),
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            Self::BadImage(_) => StatusCode::BAD_REQUEST,
            Self::NotFound(_) => StatusCode::NOT_FOUND,
            Self::EmptyCaption => StatusCode::UNPROCESSABLE_ENTITY,
            Self::Untrained | Self::EmptyQueue | Self::NoTasks => StatusCode::CONFLICT,
            Self::Busy => StatusCode::LOCKED,
            Self::Core(loopcap_core::Error::Untrained) => StatusCode::CONFLICT,
            Self::Core(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = self.status();
        if status.is_server_error() {
            tracing::error!(error = %self, "request failed");
        }
        (status, Json(serde_json::json!({ "error": self.to_string() }))).into_response()
    }
}
