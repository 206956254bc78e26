//! JSON-over-HTTP front for [`AppCore`].
//!
//! POST /sessions {"predictor": ...}         -> 201 {"session_id": ...}
//! POST /sessions/{id}/observe {"info": ...} -> 200 {"op", "target_index", "memory_size"}
//! GET  /sessions/{id}/memory                -> 200 memory snapshot
//! DELETE /sessions/{id}                     -> 204
//!
//! Predictor calls may block on the network, so handlers run the store work
//! on the blocking pool.

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use memctl_core::predictor::PredictorKind;
use memctl_core::Memory;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::store::{AppCore, ServiceError};

#[derive(Debug, Deserialize)]
struct CreateRequest {
    predictor: String,
}

#[derive(Debug, Serialize)]
struct CreateResponse {
    session_id: String,
}

#[derive(Debug, Deserialize)]
struct ObserveRequest {
    info: String,
}

#[derive(Debug, Serialize)]
struct ObserveResponse {
    op: String,
    target_index: Option<usize>,
    memory_size: usize,
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    error: String,
}

struct ApiError {
    status: StatusCode,
    message: String,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(ErrorBody { error: self.message })).into_response()
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        let status = match &e {
            ServiceError::SessionNotFound => StatusCode::NOT_FOUND,
            ServiceError::EmptyInfo | ServiceError::UnknownPredictor(_) => StatusCode::BAD_REQUEST,
            ServiceError::Predict(_) => StatusCode::BAD_GATEWAY,
            ServiceError::Apply(_) | ServiceError::CorruptSession { .. } | ServiceError::Io(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        };
        ApiError { status, message: e.to_string() }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(rejection: JsonRejection) -> Self {
        ApiError { status: StatusCode::BAD_REQUEST, message: rejection.body_text() }
    }
}

async fn on_blocking_pool<T, F>(work: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce() -> Result<T, ServiceError> + Send + 'static,
{
    tokio::task::spawn_blocking(work)
        .await
        .map_err(|e| ApiError {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: format!("worker panicked: {e}"),
        })?
        .map_err(ApiError::from)
}

async fn create_session(
    State(app): State<Arc<AppCore>>,
    body: Result<Json<CreateRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<CreateResponse>), ApiError> {
    let Json(request) = body?;
    let kind: PredictorKind = request
        .predictor
        .parse()
        .map_err(|e: String| ApiError { status: StatusCode::BAD_REQUEST, message: e })?;
    let session_id = on_blocking_pool(move || app.create_session(kind)).await?;
    Ok((StatusCode::CREATED, Json(CreateResponse { session_id })))
}

async fn observe(
    State(app): State<Arc<AppCore>>,
    Path(session_id): Path<String>,
    body: Result<Json<ObserveRequest>, JsonRejection>,
) -> Result<Json<ObserveResponse>, ApiError> {
    let Json(request) = body?;
    let observed = on_blocking_pool(move || app.observe(&session_id, &request.info)).await?;
    Ok(Json(ObserveResponse {
        op: observed.op.kind().as_str().to_owned(),
        target_index: observed.op.target_index(),
        memory_size: observed.memory_size,
    }))
}

async fn get_memory(
    State(app): State<Arc<AppCore>>,
    Path(session_id): Path<String>,
) -> Result<Json<Memory>, ApiError> {
    let memory = on_blocking_pool(move || app.memory(&session_id)).await?;
    Ok(Json(memory))
}

async fn delete_session(
    State(app): State<Arc<AppCore>>,
    Path(session_id): Path<String>,
) -> Result<StatusCode, ApiError> {
    on_blocking_pool(move || app.delete_session(&session_id)).await?;
    Ok(StatusCode::NO_CONTENT)
}

pub fn router(app: Arc<AppCore>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/:id/observe", post(observe))
        .route("/sessions/:id/memory", get(get_memory))
        .route("/sessions/:id", axum::routing::delete(delete_session))
        .with_state(app)
}

/// Serves until ctrl-c.
pub async fn serve(listener: tokio::net::TcpListener, app: Arc<AppCore>) -> std::io::Result<()> {
    axum::serve(listener, router(app))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
