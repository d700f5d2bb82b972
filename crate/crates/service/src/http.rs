//! HTTP+JSON endpoints over a shared [`Store`].
//!
//! Request bodies are read as raw bytes and parsed here so that every
//! failure, including malformed JSON, comes back as a `{code, message, path}`
//! object.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use timecrit::ecda::TreatmentOption;

use crate::assessment::{AssessmentRequest, DEFAULT_GRID};
use crate::error::{parse_json, ServiceError};
use crate::session::Finding;
use crate::store::{NewSession, Store};

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.http_status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

type Reply<T> = Result<T, ServiceError>;

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub id: String,
}

#[derive(Debug, Deserialize)]
struct LoadAndGoRequest {
    #[serde(flatten)]
    treatment: TreatmentOption,
    #[serde(default)]
    now: Option<f64>,
}

pub fn router(store: Arc<Store>) -> Router {
    Router::new()
        .route("/models", post(load_model))
        .route("/models/{id}", get(export_model))
        .route("/sessions", post(create_session))
        .route("/sessions/import", post(import_session))
        .route("/sessions/{id}/findings", post(post_finding))
        .route("/sessions/{id}/assessment", get(get_assessment))
        .route("/sessions/{id}/export", get(export_session))
        .route("/sessions/{id}/load-and-go", post(load_and_go))
        .route("/scenarios/evaluate", post(evaluate_scenario))
        .with_state(store)
}

/// Serves the API until the process is stopped.
pub async fn serve(addr: SocketAddr, store: Arc<Store>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(store)).await
}

async fn load_model(State(store): State<Arc<Store>>, body: Bytes) -> Reply<(StatusCode, Json<Created>)> {
    let id = store.load_model(&body)?;
    Ok((StatusCode::CREATED, Json(Created { id })))
}

async fn export_model(State(store): State<Arc<Store>>, Path(id): Path<String>) -> Reply<Response> {
    let bundle = store.model(&id)?;
    Ok(([(header::CONTENT_TYPE, "application/json")], bundle.to_json()).into_response())
}

async fn create_session(State(store): State<Arc<Store>>, body: Bytes) -> Reply<(StatusCode, Json<Created>)> {
    let request: NewSession = parse_json(&body)?;
    let id = store.create_session(request)?;
    Ok((StatusCode::CREATED, Json(Created { id })))
}

async fn post_finding(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Reply<impl IntoResponse> {
    let finding: Finding = parse_json(&body)?;
    Ok(Json(store.post_finding(&id, finding)?))
}

fn parse_number(name: &str, raw: &str) -> Result<f64, ServiceError> {
    raw.trim()
        .parse::<f64>()
        .map_err(|_| ServiceError::invalid(name, format!("`{raw}` is not a number")))
}

async fn get_assessment(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    Query(query): Query<HashMap<String, String>>,
) -> Reply<impl IntoResponse> {
    let session = store.session(&id)?;
    let now = match query.get("now") {
        Some(raw) => parse_number("now", raw)?,
        None => session.last_timestamp(),
    };
    let grid = match query.get("grid") {
        Some(raw) if !raw.trim().is_empty() => raw
            .split(',')
            .enumerate()
            .map(|(i, d)| parse_number(&format!("grid[{i}]"), d))
            .collect::<Result<Vec<_>, _>>()?,
        Some(_) => Vec::new(),
        None => DEFAULT_GRID.to_vec(),
    };
    Ok(Json(store.get_assessment(&id, &AssessmentRequest::at(now).with_grid(grid))?))
}

async fn export_session(State(store): State<Arc<Store>>, Path(id): Path<String>) -> Reply<Response> {
    let bytes = store.save_session(&id)?;
    Ok(([(header::CONTENT_TYPE, "application/json")], bytes).into_response())
}

async fn import_session(State(store): State<Arc<Store>>, body: Bytes) -> Reply<(StatusCode, Json<Created>)> {
    let id = store.load_session(&body)?;
    Ok((StatusCode::CREATED, Json(Created { id })))
}

async fn load_and_go(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    body: Bytes,
) -> Reply<impl IntoResponse> {
    let request: LoadAndGoRequest = parse_json(&body)?;
    Ok(Json(store.load_and_go(&id, &request.treatment, request.now)?))
}

async fn evaluate_scenario(State(store): State<Arc<Store>>, body: Bytes) -> Reply<impl IntoResponse> {
    Ok(Json(store.evaluate_scenario(&body)?))
}
