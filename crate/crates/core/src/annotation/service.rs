use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use super::{
    AnnotationError, AnnotationStore, BoxConvention, ConflictAction, ConsensusPolicy, ConsensusRule, Label, PixelBox,
    DEFAULT_PAGE_SIZE,
};

pub const ANNOTATOR_HEADER: &str = "x-annotator-id";

pub struct ServiceState {
    pub store: AnnotationStore,
    pub clock: fn() -> u64,
}

impl ServiceState {
    pub fn new(store: AnnotationStore) -> Self {
        ServiceState { store, clock: now_ms }
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

struct ApiError(StatusCode, String);

impl From<AnnotationError> for ApiError {
    fn from(e: AnnotationError) -> Self {
        use AnnotationError::*;
        let status = match &e {
            UnknownDataset(_) | UnknownTile { .. } | PageOutOfRange { .. } => StatusCode::NOT_FOUND,
            NotAssigned { .. } => StatusCode::FORBIDDEN,
            Io(_) | Log { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn annotator(headers: &HeaderMap) -> ApiResult<String> {
    headers
        .get(ANNOTATOR_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::to_string)
        .ok_or_else(|| ApiError(StatusCode::BAD_REQUEST, format!("missing {ANNOTATOR_HEADER} header")))
}

/// Routes:
/// - `GET  /users/{annotator}/datasets`
/// - `GET  /datasets/{dataset}/pages/{index}?page_size=16`
/// - `POST /datasets/{dataset}/labels` `{tile_id, label}`
/// - `GET|POST /datasets/{dataset}/tiles/{tile_id}/boxes` `{convention, boxes}`
/// - `GET  /datasets/{dataset}/tiles/{tile_id}/image`
/// - `GET  /datasets/{dataset}/export?min_annotators=&rule=&conflict_action=`
///
/// Calls acting for an annotator carry the `x-annotator-id` header.
pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/users/{annotator}/datasets", get(list_datasets))
        .route("/datasets/{dataset}/pages/{index}", get(get_page))
        .route("/datasets/{dataset}/labels", axum::routing::post(post_label))
        .route("/datasets/{dataset}/tiles/{tile_id}/boxes", get(get_boxes).post(post_boxes))
        .route("/datasets/{dataset}/tiles/{tile_id}/image", get(get_image))
        .route("/datasets/{dataset}/export", get(get_export))
        .with_state(state)
}

async fn list_datasets(State(s): State<Arc<ServiceState>>, Path(who): Path<String>) -> Json<serde_json::Value> {
    Json(json!({ "annotator": who, "datasets": s.store.datasets_for(&who) }))
}

#[derive(Deserialize)]
struct PageQuery {
    page_size: Option<usize>,
}

async fn get_page(
    State(s): State<Arc<ServiceState>>,
    Path((dataset, index)): Path<(String, usize)>,
    Query(q): Query<PageQuery>,
    headers: HeaderMap,
) -> ApiResult<Json<serde_json::Value>> {
    let who = annotator(&headers)?;
    let (page, tiles) = s
        .store
        .page_view(&dataset, &who, index, q.page_size.unwrap_or(DEFAULT_PAGE_SIZE))?;
    Ok(Json(json!({
        "dataset": page.dataset,
        "page_index": page.page_index,
        "page_size": page.page_size,
        "page_count": page.page_count,
        "tiles": tiles,
    })))
}

#[derive(Deserialize)]
struct LabelBody {
    tile_id: String,
    label: Label,
}

async fn post_label(
    State(s): State<Arc<ServiceState>>,
    Path(dataset): Path<String>,
    headers: HeaderMap,
    Json(body): Json<LabelBody>,
) -> ApiResult<Json<serde_json::Value>> {
    let who = annotator(&headers)?;
    let rec = s.store.set_label(&dataset, &who, &body.tile_id, body.label, (s.clock)())?;
    Ok(Json(serde_json::to_value(rec).expect("record serializes")))
}

async fn get_boxes(
    State(s): State<Arc<ServiceState>>,
    Path((dataset, tile_id)): Path<(String, String)>,
) -> ApiResult<Json<serde_json::Value>> {
    let b = s.store.boxes(&dataset, &tile_id)?;
    Ok(Json(json!({ "tile_id": tile_id, "annotations": b })))
}

#[derive(Deserialize)]
struct BoxBody {
    convention: BoxConvention,
    boxes: Vec<PixelBox>,
}

async fn post_boxes(
    State(s): State<Arc<ServiceState>>,
    Path((dataset, tile_id)): Path<(String, String)>,
    headers: HeaderMap,
    Json(body): Json<BoxBody>,
) -> ApiResult<Json<serde_json::Value>> {
    let who = annotator(&headers)?;
    let a = s
        .store
        .put_boxes(&dataset, &who, &tile_id, &body.boxes, body.convention, (s.clock)())?;
    Ok(Json(serde_json::to_value(a).expect("annotation serializes")))
}

async fn get_image(
    State(s): State<Arc<ServiceState>>,
    Path((dataset, tile_id)): Path<(String, String)>,
) -> ApiResult<Response> {
    let path = s.store.image_path(&dataset, &tile_id)?;
    let bytes = std::fs::read(&path)
        .map_err(|e| ApiError(StatusCode::NOT_FOUND, format!("{}: {e}", path.display())))?;
    let ct = match path.extension().and_then(|e| e.to_str()) {
        Some("ppm") => "image/x-portable-pixmap",
        _ => "image/png",
    };
    Ok(([(header::CONTENT_TYPE, ct)], bytes).into_response())
}

#[derive(Deserialize)]
struct ExportQuery {
    min_annotators: Option<usize>,
    rule: Option<ConsensusRule>,
    conflict_action: Option<ConflictAction>,
}

async fn get_export(
    State(s): State<Arc<ServiceState>>,
    Path(dataset): Path<String>,
    Query(q): Query<ExportQuery>,
) -> ApiResult<Json<serde_json::Value>> {
    let d = ConsensusPolicy::default();
    let policy = ConsensusPolicy {
        min_annotators: q.min_annotators.unwrap_or(d.min_annotators),
        rule: q.rule.unwrap_or(d.rule),
        conflict_action: q.conflict_action.unwrap_or(d.conflict_action),
    };
    let e = s.store.export(&dataset, &policy)?;
    Ok(Json(serde_json::to_value(e).expect("export serializes")))
}
