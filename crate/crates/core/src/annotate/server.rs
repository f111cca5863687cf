//! HTTP API for the annotation workflow.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use tokio::sync::Mutex;
use tower_http::services::ServeDir;

use super::store::{AnnotationStore, StoreError};
use super::views::{derive_view, export_reference, subjectivity_report, ViewKind};
use crate::model::{PredictionSet, ReportRecord, TriState, TriStateAnnotation};

pub const DEFAULT_PORT: u16 = 8642;
pub const ANNOTATOR_HEADER: &str = "x-annotator-id";

pub struct AppState {
    pub store: Mutex<AnnotationStore>,
    pub reports: BTreeMap<String, ReportRecord>,
    /// Shown next to each report only when `show_predictions` is set.
    pub predictions: Vec<PredictionSet>,
    pub show_predictions: bool,
}

impl AppState {
    pub fn new(store: AnnotationStore, reports: Vec<ReportRecord>) -> Self {
        Self {
            store: Mutex::new(store),
            reports: reports.into_iter().map(|r| (r.report_id.clone(), r)).collect(),
            predictions: Vec::new(),
            show_predictions: false,
        }
    }
}

struct ApiError(StatusCode, Value);

impl ApiError {
    fn bad(msg: impl Into<String>) -> Self {
        ApiError(StatusCode::BAD_REQUEST, json!({ "error": msg.into() }))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let msg = e.to_string();
        match e {
            StoreError::UnknownSession(_) => ApiError(StatusCode::NOT_FOUND, json!({ "error": msg })),
            StoreError::UnknownReports(ids) => {
                ApiError(StatusCode::BAD_REQUEST, json!({ "error": msg, "unknown": ids }))
            }
            StoreError::MissingLabels(labels) => {
                ApiError(StatusCode::BAD_REQUEST, json!({ "error": msg, "missing": labels }))
            }
            StoreError::UnknownLabels(labels) => {
                ApiError(StatusCode::BAD_REQUEST, json!({ "error": msg, "unknown": labels }))
            }
            StoreError::Io(_) | StoreError::Corrupt { .. } => {
                ApiError(StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": msg }))
            }
            _ => ApiError::bad(msg),
        }
    }
}

type ApiResult = Result<Response, ApiError>;

fn header_annotator(headers: &HeaderMap) -> Option<String> {
    headers
        .get(ANNOTATOR_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::to_string)
        .filter(|s| !s.is_empty())
}

#[derive(Deserialize)]
struct NewSession {
    #[serde(default)]
    annotator_id: Option<String>,
    report_ids: Vec<String>,
}

async fn create_session(
    State(app): State<Arc<AppState>>,
    headers: HeaderMap,
    Json(body): Json<NewSession>,
) -> ApiResult {
    let annotator = body
        .annotator_id
        .filter(|s| !s.is_empty())
        .or_else(|| header_annotator(&headers))
        .ok_or_else(|| ApiError::bad("annotator_id is required"))?;
    let session = app.store.lock().await.start_session(&annotator, body.report_ids)?;
    Ok((StatusCode::CREATED, Json(session)).into_response())
}

async fn get_session(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let store = app.store.lock().await;
    Ok(Json(store.session(&id)?).into_response())
}

async fn next_report(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult {
    let store = app.store.lock().await;
    let session = store.session(&id)?;
    let Some(report_id) = session.next_report() else {
        return Ok(Json(json!({ "done": true, "total": session.queue.len() })).into_response());
    };
    let record = app.reports.get(report_id);
    let mut body = json!({
        "done": false,
        "report_id": report_id,
        "position": session.cursor,
        "total": session.queue.len(),
        "findings": record.and_then(|r| r.findings.clone()),
        "text": record.map(|r| r.raw_text.clone()),
    });
    if app.show_predictions {
        let preds: BTreeMap<&str, Value> = app
            .predictions
            .iter()
            .filter_map(|p| {
                p.predictions.get(report_id).map(|v| {
                    let d: BTreeMap<&str, u8> = v.decisions.iter().map(|(l, &b)| (l.as_str(), u8::from(b))).collect();
                    (p.labeler_name.as_str(), json!(d))
                })
            })
            .collect();
        body["predictions"] = json!(preds);
    }
    Ok(Json(body).into_response())
}

#[derive(Deserialize)]
struct Submission {
    report_id: String,
    #[serde(default)]
    annotator_id: Option<String>,
    labels: BTreeMap<String, TriState>,
    #[serde(default)]
    note: Option<String>,
    #[serde(default)]
    label_notes: BTreeMap<String, String>,
}

async fn submit(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Json(body): Json<Submission>,
) -> ApiResult {
    let annotation = TriStateAnnotation {
        report_id: body.report_id,
        annotator_id: body
            .annotator_id
            .or_else(|| header_annotator(&headers))
            .unwrap_or_default(),
        labels: body.labels,
        note: body.note.filter(|n| !n.is_empty()),
        label_notes: body.label_notes,
        timestamp: 0,
    };
    let mut store = app.store.lock().await;
    let timestamp = store.submit(&id, annotation)?;
    Ok(Json(json!({ "acknowledged": true, "timestamp": timestamp, "session": store.session(&id)? })).into_response())
}

#[derive(Deserialize)]
struct SkipBody {
    report_id: String,
}

async fn skip(State(app): State<Arc<AppState>>, Path(id): Path<String>, Json(body): Json<SkipBody>) -> ApiResult {
    let mut store = app.store.lock().await;
    store.skip(&id, &body.report_id)?;
    Ok(Json(json!({ "acknowledged": true, "session": store.session(&id)? })).into_response())
}

#[derive(Deserialize)]
struct ExportQuery {
    view: Option<String>,
    annotator: Option<String>,
}

async fn export(State(app): State<Arc<AppState>>, Query(q): Query<ExportQuery>) -> ApiResult {
    let kind: ViewKind = q
        .view
        .as_deref()
        .unwrap_or("actionable")
        .parse()
        .map_err(ApiError::bad)?;
    let store = app.store.lock().await;
    let view = derive_view(store.annotations(), kind, store.schema(), q.annotator.as_deref());
    let mut buf = Vec::new();
    export_reference(&view, store.schema(), &mut buf)
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, json!({ "error": e.to_string() })))?;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], buf).into_response())
}

async fn subjectivity(State(app): State<Arc<AppState>>, Query(q): Query<ExportQuery>) -> ApiResult {
    let store = app.store.lock().await;
    let rows = subjectivity_report(store.annotations(), store.schema(), q.annotator.as_deref());
    let body: Vec<Value> = rows
        .iter()
        .map(|r| {
            json!({
                "label": r.label,
                "positive": r.positive,
                "negative": r.negative,
                "subjective_mention": r.subjective_mention,
                "total": r.total(),
                "subjective_rate": r.subjective_rate(),
            })
        })
        .collect();
    Ok(Json(body).into_response())
}

async fn schema(State(app): State<Arc<AppState>>) -> ApiResult {
    let store = app.store.lock().await;
    let organs: Vec<Value> = store
        .schema()
        .organs()
        .iter()
        .map(|o| json!({ "name": o.name, "disease_labels": o.disease_labels, "normal_label": o.normal_label }))
        .collect();
    Ok(Json(json!({ "labels": store.schema().labels(), "organs": organs })).into_response())
}

async fn no_ui() -> impl IntoResponse {
    (
        StatusCode::NOT_FOUND,
        "No annotation UI installed. Start the server with --ui-dir <dir> to serve one; the API is under /api.\n",
    )
}

/// The API router, plus static files from `ui_dir` at `/` when given.
pub fn router(state: Arc<AppState>, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/schema", get(schema))
        .route("/api/sessions", post(create_session))
        .route("/api/session/{id}", get(get_session))
        .route("/api/session/{id}/next", get(next_report))
        .route("/api/session/{id}/annotations", post(submit))
        .route("/api/session/{id}/skip", post(skip))
        .route("/api/export", get(export))
        .route("/api/subjectivity", get(subjectivity))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(no_ui),
    }
}

/// Serves until the listener fails or the task is dropped.
pub async fn serve(listener: tokio::net::TcpListener, app: Router) -> std::io::Result<()> {
    axum::serve(listener, app).await
}
