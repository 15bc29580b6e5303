use std::future::Future;
use std::io;

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;
use tokio::net::TcpListener;

use crate::{Service, ServiceError};

fn error_response(status: StatusCode, kind: &str, message: impl ToString) -> Response {
    (status, Json(json!({"error": kind, "message": message.to_string()}))).into_response()
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let (status, kind) = match &self {
            ServiceError::PayloadTooLarge { .. } => (StatusCode::PAYLOAD_TOO_LARGE, "PayloadTooLarge"),
            ServiceError::NotFound(_) => (StatusCode::NOT_FOUND, "NotFound"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "Internal"),
        };
        error_response(status, kind, self)
    }
}

async fn post_submission(State(svc): State<Service>, body: Result<Bytes, BytesRejection>) -> Response {
    let body = match body {
        Ok(b) => b,
        Err(rejection) if rejection.status() == StatusCode::PAYLOAD_TOO_LARGE => {
            return error_response(rejection.status(), "PayloadTooLarge", rejection.body_text())
        }
        Err(rejection) => return error_response(rejection.status(), "BadRequest", rejection.body_text()),
    };
    match svc.submit(&body) {
        Ok(id) => (StatusCode::ACCEPTED, Json(json!({"id": id}))).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn get_submission(State(svc): State<Service>, Path(id): Path<u64>) -> Response {
    match svc.get_submission(id) {
        Ok(rec) => Json(rec).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn get_leaderboard(State(svc): State<Service>) -> Response {
    Json(svc.leaderboard()).into_response()
}

pub fn router(svc: Service) -> Router {
    let limit = svc.options().max_payload_bytes;
    Router::new()
        .route("/submissions", post(post_submission))
        .route("/submissions/{id}", get(get_submission))
        .route("/leaderboard", get(get_leaderboard))
        .layer(DefaultBodyLimit::max(limit))
        .with_state(svc)
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    svc: Service,
    listener: TcpListener,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> io::Result<()> {
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(svc))
        .with_graceful_shutdown(shutdown)
        .await
}
