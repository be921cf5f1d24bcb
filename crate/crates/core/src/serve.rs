//! JSON-over-HTTP inference endpoint backed by one immutable artifact.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::model_store::ModelArtifact;

pub const MAX_BODY_BYTES: usize = 64 * 1024;

#[derive(Deserialize)]
#[serde(untagged, deny_unknown_fields)]
enum PredictRequest {
    One { text: String },
    Many { texts: Vec<String> },
}

fn error(status: StatusCode, msg: impl Into<String>) -> Response {
    (status, Json(json!({ "error": msg.into() }))).into_response()
}

async fn health(State(a): State<Arc<ModelArtifact>>) -> Json<Value> {
    Json(json!({
        "status": "ok",
        "family": a.family(),
        "params": a.param_count(),
        "seed": a.metadata.seed,
        "config_hash": a.metadata.config_hash,
        "created_at": a.metadata.created_at,
        "labels": a.metadata.label_map,
    }))
}

async fn predict(State(a): State<Arc<ModelArtifact>>, body: Bytes) -> Response {
    let req: PredictRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(_) => {
            return error(
                StatusCode::BAD_REQUEST,
                "expected a JSON object {\"text\": string} or {\"texts\": [string]}",
            )
        }
    };
    let result = match req {
        PredictRequest::One { text } => a.predict_text(&text).map(|p| json!(p)),
        PredictRequest::Many { texts } => a.predict_texts(&texts).map(|p| json!(p)),
    };
    match result {
        Ok(v) => Json(v).into_response(),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

pub fn router(artifact: Arc<ModelArtifact>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/predict", post(predict))
        .layer(DefaultBodyLimit::max(MAX_BODY_BYTES))
        .with_state(artifact)
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(artifact: Arc<ModelArtifact>, addr: SocketAddr) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::io(addr.to_string(), e))?;
    axum::serve(listener, router(artifact))
        .await
        .map_err(|e| Error::io(addr.to_string(), e))
}
