use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::routing::{get, post};
use axum::{Json, Router};

use crate::error::ServiceError;
use crate::session::{
    AdvanceOutcome, CaptionResponse, FeedbackRequest, FeedbackResponse, HistoryEntry, Session, SessionState,
    UpdateOutcome,
};

/// Upload ceiling for `/caption`.
pub const MAX_UPLOAD_BYTES: usize = 32 * 1024 * 1024;

type Shared = State<Arc<Session>>;

// Training and decoding are CPU-bound, so they leave the async workers.
async fn blocking<T, F>(session: Arc<Session>, f: F) -> Result<T, ServiceError>
where
    T: Send + 'static,
    F: FnOnce(&Session) -> Result<T, ServiceError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(&session))
        .await
        .unwrap_or_else(|e| std::panic::resume_unwind(e.into_panic()))
}

async fn caption(State(s): Shared, body: Bytes) -> Result<Json<CaptionResponse>, ServiceError> {
    blocking(s, move |s| s.caption(&body)).await.map(Json)
}

async fn feedback(State(s): Shared, Json(req): Json<FeedbackRequest>) -> Result<Json<FeedbackResponse>, ServiceError> {
    blocking(s, move |s| s.feedback(req)).await.map(Json)
}

async fn flush(State(s): Shared) -> Result<Json<UpdateOutcome>, ServiceError> {
    blocking(s, |s| s.flush()).await.map(Json)
}

async fn advance(State(s): Shared) -> Result<Json<AdvanceOutcome>, ServiceError> {
    blocking(s, |s| s.advance()).await.map(Json)
}

async fn history(State(s): Shared) -> Json<Vec<HistoryEntry>> {
    Json(s.history())
}

async fn state(State(s): Shared) -> Json<SessionState> {
    Json(s.state())
}

pub fn router(session: Arc<Session>) -> Router {
    Router::new()
        .route("/caption", post(caption))
        .route("/feedback", post(feedback))
        .route("/updates/flush", post(flush))
        .route("/tasks/advance", post(advance))
        .route("/metrics/history", get(history))
        .route("/session/state", get(state))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(session)
}
