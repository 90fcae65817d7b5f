//! HTTP feedback service: caption uploads, queue corrections and fold them
//! back into the learner as small incremental updates.

mod api;
mod error;
mod session;

use std::future::Future;
use std::sync::Arc;

pub use api::{router, MAX_UPLOAD_BYTES};
pub use error::ServiceError;
pub use session::{
    AdvanceOutcome, CaptionResponse, Catalog, FeedbackInstance, FeedbackRequest, FeedbackResponse, FeedbackStatus,
    HistoryEntry, ImageRef, Session, SessionOptions, SessionState, UpdateOutcome, UpdatePermit, DEFAULT_AUTO_FLUSH,
    FEEDBACK_TASK_BASE,
};

/// Serves `session` on `listener` until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    session: Arc<Session>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    if let Ok(addr) = listener.local_addr() {
        tracing::info!(%addr, "feedback service listening");
    }
    axum::serve(listener, router(session)).with_graceful_shutdown(shutdown).await
}
