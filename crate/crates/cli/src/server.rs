//! HTTP JSON API.
//!
//! Heavy work (optimization, Monte Carlo) runs on blocking threads behind a
//! semaphore, so at most `workers` computations run at once. Requests with
//! `"async": true` return `202` and a job id to poll at `/jobs/{id}`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use bop2te::boundary::InterimCounts;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::sync::Semaphore;

use crate::app;
use crate::config::{DesignConfig, MultiDoseConfig, OcRequest};
use crate::error::{AppError, ErrorDetail};
use crate::protocol::render_protocol;
use crate::store::Store;

impl IntoResponse for AppError {
    fn into_response(self) -> Response {
        let status = match self {
            AppError::Validation { .. } => StatusCode::BAD_REQUEST,
            AppError::NotFound(_) => StatusCode::NOT_FOUND,
            AppError::Conflict(_) => StatusCode::CONFLICT,
            AppError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(self.body())).into_response()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Queued,
    Running,
    Succeeded,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct Job {
    pub id: String,
    pub kind: &'static str,
    pub status: JobStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorDetail>,
}

#[derive(Clone)]
pub struct AppState {
    store: Arc<Store>,
    jobs: Arc<Mutex<HashMap<String, Job>>>,
    workers: Arc<Semaphore>,
}

impl AppState {
    pub fn new(store: Arc<Store>, workers: usize) -> Self {
        AppState { store, jobs: Arc::default(), workers: Arc::new(Semaphore::new(workers.max(1))) }
    }

    fn set_job(&self, job: Job) {
        self.jobs.lock().unwrap_or_else(|p| p.into_inner()).insert(job.id.clone(), job);
    }

    async fn compute<T, F>(&self, f: F) -> Result<T, AppError>
    where
        T: Send + 'static,
        F: FnOnce(&Store) -> Result<T, AppError> + Send + 'static,
    {
        let _permit = self.workers.clone().acquire_owned().await.map_err(|e| AppError::Internal(e.to_string()))?;
        let store = self.store.clone();
        tokio::task::spawn_blocking(move || f(&store))
            .await
            .map_err(|e| AppError::Internal(format!("worker failed: {e}")))?
    }

    /// Queues `f` as a job and returns its id immediately.
    fn submit<T, F>(&self, kind: &'static str, f: F) -> String
    where
        T: Serialize + Send + 'static,
        F: FnOnce(&Store) -> Result<T, AppError> + Send + 'static,
    {
        let id = uuid::Uuid::new_v4().to_string();
        self.set_job(Job { id: id.clone(), kind, status: JobStatus::Queued, result: None, error: None });
        let state = self.clone();
        let job_id = id.clone();
        tokio::spawn(async move {
            let running = Job { id: job_id, kind, status: JobStatus::Running, result: None, error: None };
            let outcome = async {
                let _permit =
                    state.workers.clone().acquire_owned().await.map_err(|e| AppError::Internal(e.to_string()))?;
                state.set_job(running.clone());
                let store = state.store.clone();
                tokio::task::spawn_blocking(move || {
                    f(&store).and_then(|v| serde_json::to_value(v).map_err(|e| AppError::Internal(e.to_string())))
                })
                .await
                .map_err(|e| AppError::Internal(format!("worker failed: {e}")))?
            }
            .await;
            let done = match outcome {
                Ok(v) => Job { status: JobStatus::Succeeded, result: Some(v), ..running },
                Err(e) => Job { status: JobStatus::Failed, error: Some(e.body().error), ..running },
            };
            state.set_job(done);
        });
        id
    }
}

/// Parses a JSON body; an empty body is read as `{}`.
fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, AppError> {
    let text = if body.iter().all(u8::is_ascii_whitespace) { &b"{}"[..] } else { &body[..] };
    Ok(serde_json::from_slice(text)?)
}

#[derive(Deserialize)]
struct DesignRequest {
    #[serde(flatten)]
    config: DesignConfig,
    #[serde(default, rename = "async")]
    run_async: bool,
}

#[derive(Deserialize)]
struct MultiDoseRequest {
    #[serde(flatten)]
    config: MultiDoseConfig,
    #[serde(default, rename = "async")]
    run_async: bool,
}

#[derive(Serialize)]
struct Accepted {
    job_id: String,
    status_url: String,
}

fn accepted(job_id: String) -> Response {
    let status_url = format!("/jobs/{job_id}");
    (StatusCode::ACCEPTED, Json(Accepted { job_id, status_url })).into_response()
}

async fn healthz() -> Json<Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn create_design(State(state): State<AppState>, body: Bytes) -> Result<Response, AppError> {
    let req: DesignRequest = parse(&body)?;
    req.config.spec.validate()?;
    let config = req.config;
    if req.run_async {
        return Ok(accepted(state.submit("design", move |store| app::create_design(store, &config))));
    }
    let doc = state.compute(move |store| app::create_design(store, &config)).await?;
    Ok(Json(doc).into_response())
}

async fn get_design(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, AppError> {
    Ok(Json(state.store.document(&id)?).into_response())
}

async fn design_oc(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Response, AppError> {
    let req: OcRequest = parse(&body)?;
    let doc = state.store.document(&id)?;
    let report = state.compute(move |_| app::oc_report(&doc, &req)).await?;
    Ok(Json(report).into_response())
}

async fn post_decision(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, AppError> {
    let counts: InterimCounts = parse(&body)?;
    let entry = state.compute(move |store| app::record_decision(store, &id, counts)).await?;
    Ok(Json(entry).into_response())
}

async fn list_decisions(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, AppError> {
    Ok(Json(state.store.decisions(&id)?).into_response())
}

async fn protocol(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, AppError> {
    let doc = state.store.document(&id)?;
    let text = render_protocol(&doc)?;
    Ok(Json(serde_json::json!({ "document_id": doc.id, "text": text })).into_response())
}

async fn multidose(State(state): State<AppState>, body: Bytes) -> Result<Response, AppError> {
    let req: MultiDoseRequest = parse(&body)?;
    req.config.validate()?;
    let config = req.config;
    if req.run_async {
        return Ok(accepted(state.submit("multidose", move |_| app::run_multidose(&config))));
    }
    let result = state.compute(move |_| app::run_multidose(&config)).await?;
    Ok(Json(result).into_response())
}

async fn get_job(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, AppError> {
    let jobs = state.jobs.lock().unwrap_or_else(|p| p.into_inner());
    let job = jobs.get(&id).cloned().ok_or_else(|| AppError::NotFound(format!("no job with id `{id}`")))?;
    Ok(Json(job).into_response())
}

async fn fallback() -> AppError {
    AppError::NotFound("no such endpoint".into())
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/designs", post(create_design))
        .route("/designs/{id}", get(get_design))
        .route("/designs/{id}/oc", post(design_oc))
        .route("/designs/{id}/decisions", post(post_decision).get(list_decisions))
        .route("/designs/{id}/protocol", get(protocol))
        .route("/simulations/multidose", post(multidose))
        .route("/jobs/{id}", get(get_job))
        .fallback(fallback)
        .with_state(state)
}

pub async fn serve(store: Arc<Store>, bind: &str, workers: usize) -> Result<(), AppError> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    eprintln!("bop2te listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(AppState::new(store, workers))).await?;
    Ok(())
}
