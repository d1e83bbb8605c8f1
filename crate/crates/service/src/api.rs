//! JSON API over a project.
//!
//! Readers clone an `Arc` of the current [`Snapshot`] and never wait on
//! ingestion; the single writer builds the next snapshot and swaps it in.
//! What-if requests compute on the reader's snapshot and store nothing.

use std::sync::{Arc, Mutex, PoisonError, RwLock};

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use dynassure_core::ingest::DataRun;
use serde::{Deserialize, Serialize};

use crate::documents::{self, to_json, ErrorDocument, RunAccepted, WhatIfRequest};
use crate::error::ServiceError;
use crate::project::{Project, Snapshot};

pub struct AppState {
    writer: Mutex<Project>,
    current: RwLock<Arc<Snapshot>>,
}

impl AppState {
    pub fn new(project: Project) -> Arc<Self> {
        let current = RwLock::new(Arc::new(project.snapshot().clone()));
        Arc::new(Self {
            writer: Mutex::new(project),
            current,
        })
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.current.read().unwrap_or_else(PoisonError::into_inner).clone()
    }

    fn ingest(&self, run: DataRun) -> Result<RunAccepted, ServiceError> {
        let mut project = self.writer.lock().unwrap_or_else(PoisonError::into_inner);
        project.ingest(run.clone())?;
        let next = Arc::new(project.snapshot().clone());
        let accepted = RunAccepted::new(&run, next.store.runs().len());
        *self.current.write().unwrap_or_else(PoisonError::into_inner) = next;
        Ok(accepted)
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/indicators", get(get_indicators))
        .route("/risk", get(get_risk))
        .route("/trend", get(get_trend))
        .route("/consistency", get(get_consistency))
        .route("/runs", post(post_runs))
        .route("/whatif", post(post_whatif))
        .with_state(state)
}

fn json_response(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        json_response(self.status(), to_json(&ErrorDocument::from(&self)))
    }
}

/// Serializes a document exactly as the CLI report prints it.
struct Document(String);

impl Document {
    fn of<T: Serialize>(doc: T) -> Self {
        Document(to_json(&doc))
    }
}

impl IntoResponse for Document {
    fn into_response(self) -> Response {
        json_response(StatusCode::OK, self.0)
    }
}

type ApiResult = Result<Document, ServiceError>;

async fn get_indicators(State(state): State<Arc<AppState>>) -> ApiResult {
    documents::indicators(&state.snapshot()).map(Document::of)
}

async fn get_risk(State(state): State<Arc<AppState>>) -> ApiResult {
    documents::risk(&state.snapshot()).map(Document::of)
}

#[derive(Debug, Deserialize)]
struct TrendQuery {
    event: Option<String>,
}

async fn get_trend(State(state): State<Arc<AppState>>, Query(query): Query<TrendQuery>) -> ApiResult {
    let event = query
        .event
        .ok_or_else(|| ServiceError::BadRequest("missing `event` query parameter".into()))?;
    documents::trend(&state.snapshot(), &event).map(Document::of)
}

async fn get_consistency(State(state): State<Arc<AppState>>) -> ApiResult {
    documents::consistency(&state.snapshot()).map(Document::of)
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &[u8]) -> Result<T, ServiceError> {
    serde_json::from_slice(body).map_err(|e| ServiceError::BadRequest(e.to_string()))
}

async fn post_runs(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ServiceError> {
    let run: DataRun = parse_body(&body)?;
    let accepted = tokio::task::spawn_blocking(move || state.ingest(run))
        .await
        .map_err(|e| ServiceError::Computation(e.to_string()))??;
    Ok(json_response(StatusCode::CREATED, to_json(&accepted)))
}

async fn post_whatif(State(state): State<Arc<AppState>>, body: Bytes) -> ApiResult {
    let request: WhatIfRequest = parse_body(&body)?;
    documents::whatif(&state.snapshot(), &request).map(Document::of)
}

/// Serves the API on `addr` until the process is stopped.
pub async fn serve(state: Arc<AppState>, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}
