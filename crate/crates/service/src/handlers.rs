use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use prefpcp_core::ingest::{parse_auto, parse_csv, parse_json, IngestError};
use prefpcp_core::pipeline::{Analysis, Selection};
use prefpcp_core::{EmbedMethod, EmbedOptions, Error, ErrorKind};
use serde::{Deserialize, Serialize};

use crate::store::dataset_id;
use crate::AppState;

/// Error body: `{"error": <variant name>, "message": <text>}`.
#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    status: StatusCode,
    error: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, error: &'static str, message: impl Into<String>) -> Self {
        Self { status, error, message: message.into() }
    }

    fn unknown_dataset(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "UnknownDataset", format!("no dataset with id `{id}`"))
    }

    fn bad_request(error: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, error, message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e.kind() {
            ErrorKind::Input => StatusCode::BAD_REQUEST,
            ErrorKind::Numeric => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorKind::Selection => StatusCode::NOT_FOUND,
        };
        Self::new(status, e.name(), e.to_string())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        Self::bad_request("InvalidQuery", e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::to_string(&self).expect("error body serializes");
        (self.status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
    }
}

fn json_response(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

#[derive(Debug, Default, Deserialize)]
pub struct UploadQuery {
    method: Option<String>,
    seed: Option<u64>,
    grid: Option<usize>,
}

pub async fn upload(
    State(state): State<Arc<AppState>>,
    query: Result<Query<UploadQuery>, QueryRejection>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let Query(query) = query?;
    let defaults = state.config.embed;
    let method = match query.method.as_deref() {
        Some(m) => m.parse::<EmbedMethod>().map_err(Error::from)?,
        None => defaults.method,
    };
    let options = EmbedOptions {
        method,
        seed: query.seed.unwrap_or(defaults.seed),
        grid: query.grid.unwrap_or(defaults.grid),
    };

    let text = std::str::from_utf8(&body)
        .map_err(|_| ApiError::bad_request("InvalidEncoding", "request body is not UTF-8"))?;
    let content_type = headers.get(header::CONTENT_TYPE).and_then(|v| v.to_str().ok()).unwrap_or("");
    let dataset = parse_body(text, content_type).map_err(Error::from)?;

    let id = dataset_id(&dataset, &options);
    let analysis = match state.sessions.get(&id) {
        Some(existing) => existing,
        None => {
            let built = tokio::task::spawn_blocking(move || Analysis::build(dataset, options))
                .await
                .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string()))??;
            let built = Arc::new(built);
            state.sessions.insert(id.clone(), built.clone());
            built
        }
    };
    let body = serde_json::to_string(&analysis.summary(id)).expect("summary serializes");
    Ok(json_response(StatusCode::CREATED, body))
}

/// A blank body has no header to complain about; it is reported as empty
/// whatever the declared format.
fn parse_body(text: &str, content_type: &str) -> Result<prefpcp_core::Dataset, IngestError> {
    if text.trim().is_empty() {
        return Err(IngestError::EmptyDataset);
    }
    let mime = content_type.split(';').next().unwrap_or("").trim().to_ascii_lowercase();
    match mime.as_str() {
        "text/csv" => parse_csv(text),
        "application/json" => parse_json(text),
        _ => parse_auto(text),
    }
}

pub async fn radar_grid(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let analysis = state.sessions.get(&id).ok_or_else(|| ApiError::unknown_dataset(&id))?;
    let body = serde_json::to_string(analysis.grid()).expect("grid serializes");
    Ok(json_response(StatusCode::OK, body))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreferenceRequest {
    cell: Option<(usize, usize)>,
    f_r: Option<Vec<f64>>,
}

impl PreferenceRequest {
    fn selection(self) -> Result<Selection, ApiError> {
        match (self.cell, self.f_r) {
            (Some((i, j)), None) => Ok(Selection::Cell(i, j)),
            (None, Some(f_r)) => Ok(Selection::Point(f_r)),
            _ => Err(ApiError::bad_request("InvalidRequest", "body needs exactly one of `cell` or `f_r`")),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
pub struct PreferenceQuery {
    top_k: Option<usize>,
}

pub async fn preference(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    query: Result<Query<PreferenceQuery>, QueryRejection>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let Query(query) = query?;
    let analysis = state.sessions.get(&id).ok_or_else(|| ApiError::unknown_dataset(&id))?;
    let request: PreferenceRequest =
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request("InvalidRequest", e.to_string()))?;
    let selection = request.selection()?;
    let top_k = query.top_k.unwrap_or(state.config.top_k);
    let outcome = analysis.respond(&selection, top_k)?;
    let body = serde_json::to_string(&outcome).expect("outcome serializes");
    Ok(json_response(StatusCode::OK, body))
}
