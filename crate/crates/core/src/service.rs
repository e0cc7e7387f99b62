//! HTTP endpoints over the shared pipeline.
//!
//! | route | body / query | response |
//! |---|---|---|
//! | `GET /api/health` | | `{"status": "ok"}` |
//! | `GET /api/seeds?q=&limit=` | | seeds document |
//! | `POST /api/graph` | run config (JSON) | graph document |
//! | `POST /api/series` | run config plus `timestamps` | series document |
//!
//! Errors come back as `{"error": {"kind", "message"}}` with status 400
//! (invalid config), 404 (unknown seed), 502 (backend) or 500.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde_json::json;

use crate::pipeline::{self, document_json, PipelineError, RunConfig};
use crate::source::Source;

const DEFAULT_SEED_LIMIT: usize = 10;

#[derive(Clone)]
struct AppState {
    source: Arc<Source>,
}

pub fn router(source: Arc<Source>) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/seeds", get(seeds))
        .route("/api/graph", post(graph))
        .route("/api/series", post(series))
        .with_state(AppState { source })
}

/// Serves until Ctrl-C.
pub async fn serve(addr: SocketAddr, source: Arc<Source>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(source))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

fn json_response(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn error_response(e: PipelineError) -> Response {
    let kind = match e {
        PipelineError::Config(_) => "config",
        PipelineError::NotFound(_) => "not_found",
        PipelineError::Backend(_) => "backend",
        PipelineError::Internal(_) => "internal",
    };
    let status = StatusCode::from_u16(e.http_status()).expect("valid status");
    json_response(status, document_json(&json!({"error": {"kind": kind, "message": e.to_string()}})))
}

async fn run_blocking<T, F>(f: F) -> Response
where
    F: FnOnce() -> Result<T, PipelineError> + Send + 'static,
    T: serde::Serialize + Send + 'static,
{
    match tokio::task::spawn_blocking(f).await {
        Ok(Ok(doc)) => json_response(StatusCode::OK, document_json(&doc)),
        Ok(Err(e)) => error_response(e),
        Err(join) => error_response(PipelineError::Internal(join.to_string())),
    }
}

async fn health() -> Response {
    json_response(StatusCode::OK, document_json(&json!({"status": "ok"})))
}

async fn seeds(State(state): State<AppState>, Query(params): Query<HashMap<String, String>>) -> Response {
    let term = params.get("q").cloned().unwrap_or_default();
    let limit = match params.get("limit").map(|l| l.parse::<usize>()) {
        None => DEFAULT_SEED_LIMIT,
        Some(Ok(l)) => l,
        Some(Err(_)) => return error_response(PipelineError::Config("limit must be a positive integer".into())),
    };
    run_blocking(move || pipeline::run_search(&state.source, &term, limit)).await
}

fn request_config(body: &str) -> Result<RunConfig, PipelineError> {
    let cfg = RunConfig::from_json(body)?;
    reject_backend(&cfg)?;
    Ok(cfg)
}

fn reject_backend(cfg: &RunConfig) -> Result<(), PipelineError> {
    match cfg.backend {
        Some(_) => Err(PipelineError::Config("the backend is fixed by the server".into())),
        None => Ok(()),
    }
}

async fn graph(State(state): State<AppState>, body: String) -> Response {
    let cfg = match request_config(&body).and_then(|c| c.validate().map(|_| c)) {
        Ok(c) => c,
        Err(e) => return error_response(e),
    };
    run_blocking(move || pipeline::run_build(&state.source, &cfg).map(|out| out.document)).await
}

async fn series(State(state): State<AppState>, body: String) -> Response {
    let parsed = pipeline::parse_series_request(&body)
        .and_then(|(cfg, stamps)| reject_backend(&cfg).and_then(|_| cfg.validate()).map(|_| (cfg, stamps)));
    let (cfg, stamps) = match parsed {
        Ok(p) => p,
        Err(e) => return error_response(e),
    };
    run_blocking(move || pipeline::run_series(&state.source, &cfg, &stamps)).await
}
