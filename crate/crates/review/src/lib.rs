//! JSON-over-HTTP front end for the manual-review queue.
//!
//! Every mutation (lease, annotation append) goes through one mutex, so the
//! annotation log has a single writer. Endpoints are documented in
//! `docs/api.md`.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use smelldata_core::pipeline::{self, PipelineConfig, PipelineError};
use smelldata_core::review::*;
use smelldata_core::sample::{Label, RefactoringAction, Smell};
use smelldata_core::store::{DatasetStats, SampleRecord};

pub const REVIEWER_HEADER: &str = "x-reviewer-id";

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

struct Inner {
    queue: ReviewQueue,
    log: File,
}

pub struct ReviewState {
    inner: Mutex<Inner>,
    clock: Arc<dyn Clock>,
    cfg: PipelineConfig,
}

impl ReviewState {
    /// Loads the grouped samples and replays the annotation log of the
    /// configured output directory.
    pub fn open(cfg: PipelineConfig, clock: Arc<dyn Clock>, lease_ttl: Duration) -> Result<Self, PipelineError> {
        let a = cfg.artifacts();
        let samples = pipeline::read_samples(&cfg)?;
        let log = pipeline::read_annotations(&a.annotations())?;
        let queue = ReviewQueue::new(samples, log, lease_ttl).map_err(PipelineError::Annotations)?;
        let path = a.annotations();
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| smelldata_core::StoreError::Io { path: path.clone(), source: e })?;
        Ok(ReviewState { inner: Mutex::new(Inner { queue, log: file }), clock, cfg })
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }
}

pub fn router(state: Arc<ReviewState>) -> Router {
    Router::new()
        .route("/api/v1/next-sample", get(next_sample))
        .route("/api/v1/annotations", post(annotate))
        .route("/api/v1/samples/{id}", get(sample))
        .route("/api/v1/checklists/{smell}", get(get_checklist))
        .route("/api/v1/stats", get(stats))
        .route("/api/v1/export", post(export))
        .with_state(state)
}

pub async fn serve(addr: SocketAddr, state: Arc<ReviewState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, "review service listening");
    axum::serve(listener, router(state)).await
}

// ---------------------------------------------------------------------------
// Wire types
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub kind: RejectionKind,
    pub field: String,
    pub reason: String,
}

struct Failure(StatusCode, ApiError);

impl Failure {
    fn bad_request(field: &str, reason: impl Into<String>) -> Self {
        Failure(StatusCode::BAD_REQUEST, ApiError { kind: RejectionKind::Invalid, field: field.into(), reason: reason.into() })
    }

    fn internal(reason: impl Into<String>) -> Self {
        Failure(
            StatusCode::INTERNAL_SERVER_ERROR,
            ApiError { kind: RejectionKind::Invalid, field: String::new(), reason: reason.into() },
        )
    }
}

impl From<Rejection> for Failure {
    fn from(r: Rejection) -> Self {
        let status = match r.kind {
            RejectionKind::NotFound => StatusCode::NOT_FOUND,
            RejectionKind::Conflict => StatusCode::CONFLICT,
            RejectionKind::Invalid => StatusCode::UNPROCESSABLE_ENTITY,
        };
        Failure(status, ApiError { kind: r.kind, field: r.field, reason: r.reason })
    }
}

impl IntoResponse for Failure {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextSample {
    pub sample: SampleRecord,
    pub checklist: GuidelineChecklist,
    pub lease: Lease,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRequest {
    pub sample_id: String,
    pub verdict: Label,
    #[serde(default)]
    pub answers: std::collections::BTreeMap<String, bool>,
    #[serde(default)]
    pub action: Option<RefactoringAction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleView {
    pub sample: SampleRecord,
    pub annotation: Option<Annotation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportSummary {
    pub records: usize,
    pub dataset: PathBuf,
    pub stats: DatasetStats,
}

#[derive(Debug, Deserialize)]
struct SmellFilter {
    smell: Option<String>,
}

fn reviewer(headers: &HeaderMap) -> Result<String, Failure> {
    headers
        .get(REVIEWER_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .ok_or_else(|| Failure::bad_request("X-Reviewer-Id", "reviewer id header is required"))
}

fn parse_smell(code: &str) -> Option<Smell> {
    Smell::from_code(code).or_else(|| serde_json::from_value(serde_json::Value::String(code.to_string())).ok())
}

// ---------------------------------------------------------------------------
// Handlers
// ---------------------------------------------------------------------------

async fn next_sample(
    State(st): State<Arc<ReviewState>>,
    headers: HeaderMap,
    Query(f): Query<SmellFilter>,
) -> Result<Response, Failure> {
    let who = reviewer(&headers)?;
    let smell = match f.smell.as_deref() {
        None | Some("") => None,
        Some(s) => Some(parse_smell(s).ok_or_else(|| Failure::bad_request("smell", format!("unknown smell {s}")))?),
    };
    let now = st.clock.now();
    let next = st.lock().queue.next(&who, smell, now);
    Ok(match next {
        Some((sample, checklist, lease)) => Json(NextSample { sample, checklist, lease }).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    })
}

async fn annotate(
    State(st): State<Arc<ReviewState>>,
    headers: HeaderMap,
    body: Result<Json<AnnotationRequest>, JsonRejection>,
) -> Result<Response, Failure> {
    let who = reviewer(&headers)?;
    let Json(req) = body.map_err(|e| Failure::bad_request("body", e.body_text()))?;
    let now = st.clock.now();
    let a = Annotation {
        sample_id: req.sample_id,
        reviewer_id: who,
        verdict: req.verdict,
        answers: req.answers,
        action: req.action,
        timestamp: now,
    };
    let mut inner = st.lock();
    inner.queue.check(&a, now)?;
    let mut line = serde_json::to_vec(&a).map_err(|e| Failure::internal(e.to_string()))?;
    line.push(b'\n');
    inner
        .log
        .write_all(&line)
        .and_then(|_| inner.log.sync_data())
        .map_err(|e| Failure::internal(format!("annotation log write failed: {e}")))?;
    inner.queue.apply(a.clone());
    tracing::info!(sample = %a.sample_id, reviewer = %a.reviewer_id, "annotation accepted");
    Ok((StatusCode::CREATED, Json(a)).into_response())
}

async fn sample(State(st): State<Arc<ReviewState>>, Path(id): Path<String>) -> Result<Json<SampleView>, Failure> {
    let inner = st.lock();
    let sample = inner.queue.record(&id).cloned().ok_or_else(|| {
        Failure(StatusCode::NOT_FOUND, ApiError { kind: RejectionKind::NotFound, field: "id".into(), reason: "no such sample".into() })
    })?;
    Ok(Json(SampleView { sample, annotation: inner.queue.annotation(&id).cloned() }))
}

async fn get_checklist(Path(smell): Path<String>) -> Result<Json<GuidelineChecklist>, Failure> {
    let s = parse_smell(&smell).ok_or_else(|| {
        Failure(StatusCode::NOT_FOUND, ApiError { kind: RejectionKind::NotFound, field: "smell".into(), reason: format!("unknown smell {smell}") })
    })?;
    Ok(Json(checklist(s)))
}

async fn stats(State(st): State<Arc<ReviewState>>) -> Json<QueueStats> {
    let now = st.clock.now();
    Json(st.lock().queue.stats(now))
}

async fn export(State(st): State<Arc<ReviewState>>) -> Result<Json<ExportSummary>, Failure> {
    let records = st.lock().queue.export_final();
    let e = pipeline::finish_export(&st.cfg, records);
    pipeline::write_export(&st.cfg, &e).map_err(|e| Failure::internal(e.to_string()))?;
    Ok(Json(ExportSummary { records: e.records.len(), dataset: st.cfg.artifacts().dataset(), stats: e.stats }))
}
