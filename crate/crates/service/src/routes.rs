use std::path::PathBuf;
use std::sync::atomic::Ordering;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use orthorecon::blueprint::{
    extract_views, BlueprintError, FieldError, Facing, LabelKind, SourceSize, ViewDescriptor, ViewSetDescriptor,
};
use orthorecon::field::{read_checkpoint, EncoderConfig};
use orthorecon::image::read_png;
use orthorecon::reconstruct::ReconstructConfig;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::{Any, CorsLayer};

use crate::store::{valid_id, BlueprintRecord, JobState};
use crate::{AppState, ServiceConfig};

const PNG_SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";

/// Error body: `{"error": message, "errors": [{field, message}]}`.
pub(crate) struct ApiError {
    status: StatusCode,
    message: String,
    errors: Vec<FieldError>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self { status, message: message.into(), errors: Vec::new() }
    }

    fn fields(errors: Vec<FieldError>) -> Self {
        Self { status: StatusCode::UNPROCESSABLE_ENTITY, message: "validation failed".into(), errors }
    }

    fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, format!("unknown {what} '{id}'"))
    }
}

impl From<std::io::Error> for ApiError {
    fn from(e: std::io::Error) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, format!("storage: {e}"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message, "errors": self.errors }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub(crate) fn checkpoint_path(config: &ServiceConfig, id: &str) -> PathBuf {
    config.checkpoints_dir.join(format!("{id}.pafw"))
}

fn field_error(field: &str, message: impl Into<String>) -> FieldError {
    FieldError { field: field.into(), message: message.into() }
}

/// Automatic cut of an uploaded sheet. Every failure is reported in the message and
/// leaves the boxes to the reviewer; tied candidates are offered unlabeled.
fn auto_cut(sheet: &orthorecon::image::GrayImage) -> (ViewSetDescriptor, Option<String>) {
    let source_size = SourceSize { width: sheet.width(), height: sheet.height() };
    let err = match extract_views(sheet, 4) {
        Ok(views) => return (views.descriptor(), None),
        Err(e) => e,
    };
    let message = Some(err.to_string());
    let views = match err {
        BlueprintError::TieUnresolved { candidates } => candidates
            .into_iter()
            .map(|bbox| ViewDescriptor { bbox, kind: LabelKind::Unresolved, facing: Facing::Unknown })
            .collect(),
        _ => Vec::new(),
    };
    (ViewSetDescriptor { source_size, views }, message)
}

async fn upload(State(state): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> ApiResult<(StatusCode, Json<BlueprintRecord>)> {
    let content_type = headers.get(header::CONTENT_TYPE).and_then(|v| v.to_str().ok()).unwrap_or("image/png");
    let essence = content_type.split(';').next().unwrap_or("").trim().to_ascii_lowercase();
    if essence != "image/png" || !body.starts_with(PNG_SIGNATURE) {
        return Err(ApiError::new(StatusCode::UNSUPPORTED_MEDIA_TYPE, "the blueprint must be uploaded as a PNG image"));
    }
    let decoded = read_png(&body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("unreadable PNG: {e}")))?;
    let sheet = decoded.into_gray();
    let (auto, message) = tokio::task::spawn_blocking(move || auto_cut(&sheet))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    let SourceSize { width, height } = auto.source_size;
    let record = state.store.create_blueprint(&body, width, height, auto, message)?;
    Ok((StatusCode::CREATED, Json(record)))
}

async fn get_blueprint(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Json<BlueprintRecord>> {
    state.store.blueprint(&id)?.map(Json).ok_or_else(|| ApiError::not_found("blueprint", &id))
}

async fn put_views(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<BlueprintRecord>> {
    if state.store.blueprint(&id)?.is_none() {
        return Err(ApiError::not_found("blueprint", &id));
    }
    let views: ViewSetDescriptor =
        serde_json::from_slice(&body).map_err(|e| ApiError::fields(vec![field_error("body", e.to_string())]))?;
    let lock = state.store.lock(&id);
    let _guard = lock.lock().await;
    let record = state.store.blueprint(&id)?.ok_or_else(|| ApiError::not_found("blueprint", &id))?;
    let mut errors = Vec::new();
    if views.source_size != (SourceSize { width: record.width, height: record.height }) {
        errors.push(field_error(
            "source_size",
            format!("must match the uploaded image ({}x{})", record.width, record.height),
        ));
    }
    if let Err(e) = views.validate_finalized() {
        errors.extend(e);
    }
    if !errors.is_empty() {
        return Err(ApiError::fields(errors));
    }
    Ok(Json(state.store.finalize(record, views)?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ReconstructRequest {
    checkpoint: String,
    iso: Option<f64>,
    resolution: Option<usize>,
    keep_largest: Option<bool>,
}

#[derive(Serialize)]
struct JobCreated {
    job_id: String,
}

async fn start_job(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<JobCreated>)> {
    let record = state.store.blueprint(&id)?.ok_or_else(|| ApiError::not_found("blueprint", &id))?;
    let req: ReconstructRequest =
        serde_json::from_slice(&body).map_err(|e| ApiError::fields(vec![field_error("body", e.to_string())]))?;
    let defaults = ReconstructConfig::default();
    let config = ReconstructConfig {
        iso: req.iso.unwrap_or(defaults.iso),
        resolution: req.resolution.unwrap_or(defaults.resolution),
        keep_largest: req.keep_largest.unwrap_or(defaults.keep_largest),
    };
    let mut errors = Vec::new();
    if !(config.iso > 0.0 && config.iso < 1.0) {
        errors.push(field_error("iso", "must lie strictly between 0 and 1"));
    }
    if !(2..=1024).contains(&config.resolution) {
        errors.push(field_error("resolution", "must be between 2 and 1024"));
    }
    if !errors.is_empty() {
        return Err(ApiError::fields(errors));
    }
    if record.views.is_none() {
        return Err(ApiError::new(StatusCode::CONFLICT, "views must be reviewed and finalized before reconstruction"));
    }
    if !valid_id(&req.checkpoint) || !checkpoint_path(&state.config, &req.checkpoint).is_file() {
        return Err(ApiError::not_found("checkpoint", &req.checkpoint));
    }
    let reserved = state
        .pending
        .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| (n < state.config.queue_depth).then_some(n + 1));
    if reserved.is_err() {
        return Err(ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "the job queue is full; retry later"));
    }
    let job = match state.store.create_job(&record, &req.checkpoint, config) {
        Ok(job) => job,
        Err(e) => {
            state.pending.fetch_sub(1, Ordering::SeqCst);
            return Err(e.into());
        }
    };
    state.queue.send(job.id.clone()).map_err(|_| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "worker stopped"))?;
    Ok((StatusCode::ACCEPTED, Json(JobCreated { job_id: job.id })))
}

async fn list_jobs(State(state): State<Arc<AppState>>) -> ApiResult<Response> {
    Ok(Json(state.store.jobs()?).into_response())
}

async fn get_job(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let job = state.store.job(&id)?.ok_or_else(|| ApiError::not_found("job", &id))?;
    Ok(Json(job).into_response())
}

async fn get_mesh(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Response> {
    let job = state.store.job(&id)?.ok_or_else(|| ApiError::not_found("job", &id))?;
    if job.state != JobState::Done {
        return Err(ApiError::new(StatusCode::CONFLICT, format!("job is {:?}, no mesh available", job.state)));
    }
    let obj = state.store.mesh(&id)?;
    Ok(([(header::CONTENT_TYPE, HeaderValue::from_static("model/obj"))], obj).into_response())
}

#[derive(Serialize)]
struct CheckpointInfo {
    id: String,
    encoder: EncoderConfig,
    mlp_hidden: Vec<usize>,
    parameters: usize,
    trained_steps: Option<u64>,
}

async fn list_checkpoints(State(state): State<Arc<AppState>>) -> ApiResult<Json<Vec<CheckpointInfo>>> {
    let dir = state.config.checkpoints_dir.clone();
    let list = tokio::task::spawn_blocking(move || {
        let mut out = Vec::new();
        let Ok(entries) = std::fs::read_dir(&dir) else { return out };
        for path in entries.flatten().map(|e| e.path()) {
            let Some(id) = path.file_stem().and_then(|s| s.to_str()).map(str::to_string) else { continue };
            if path.extension().and_then(|e| e.to_str()) != Some("pafw") || !valid_id(&id) {
                continue;
            }
            if let Ok(ck) = std::fs::read(&path).map_err(|_| ()).and_then(|b| read_checkpoint(&b).map_err(|_| ())) {
                out.push(CheckpointInfo {
                    id,
                    encoder: ck.config.encoder.clone(),
                    mlp_hidden: ck.config.mlp_hidden.clone(),
                    parameters: ck.params.len(),
                    trained_steps: ck.state.map(|s| s.step),
                });
            }
        }
        out.sort_by(|a, b| a.id.cmp(&b.id));
        out
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok(Json(list))
}

pub(crate) fn router(state: Arc<AppState>) -> Router {
    let cors = match &state.config.cors_origin {
        Some(origin) => match origin.parse::<HeaderValue>() {
            Ok(v) => CorsLayer::new().allow_origin(v),
            Err(_) => CorsLayer::new(),
        },
        None => CorsLayer::new().allow_origin(Any),
    }
    .allow_methods(Any)
    .allow_headers(Any);
    let limit = state.config.max_upload_bytes;
    Router::new()
        .route("/blueprints", post(upload))
        .route("/blueprints/{id}", get(get_blueprint))
        .route("/blueprints/{id}/views", put(put_views))
        .route("/blueprints/{id}/reconstruct", post(start_job))
        .route("/jobs", get(list_jobs))
        .route("/jobs/{id}", get(get_job))
        .route("/jobs/{id}/mesh.obj", get(get_mesh))
        .route("/checkpoints", get(list_checkpoints))
        .layer(DefaultBodyLimit::max(limit))
        .layer(cors)
        .with_state(state)
}
