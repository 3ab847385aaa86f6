use std::path::{Path as FsPath, PathBuf};

use axum::body::Body;
use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Path, Request, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use gaudi_core::board::{serialize_score, BoardMode, Interaction};
use gaudi_core::retrieval::Hit;
use gaudi_core::story::generate_queries;
use gaudi_core::{generate_board, Catalog};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::state::{AppState, MAX_K};

/// `Json` extractor whose rejections use the service error body.
pub(crate) struct ApiJson<T>(pub T);

impl<S, T> FromRequest<S> for ApiJson<T>
where
    Json<T>: FromRequest<S, Rejection = JsonRejection>,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        let Json(value) = Json::<T>::from_request(req, state).await?;
        Ok(Self(value))
    }
}

/// A retrieval hit as returned over the wire.
#[derive(Debug, Serialize)]
pub(crate) struct HitDoc {
    image_id: String,
    path: String,
    #[serde(serialize_with = "serialize_score")]
    score: f64,
    rank: usize,
}

fn hit_docs(catalog: &Catalog, hits: Vec<Hit>) -> Vec<HitDoc> {
    hits.into_iter()
        .map(|h| {
            let path = catalog
                .position(&h.image_id)
                .map(|p| catalog.record(p).path.clone())
                .unwrap_or_default();
            HitDoc {
                image_id: h.image_id,
                path,
                score: h.score,
                rank: h.rank,
            }
        })
        .collect()
}

#[derive(Serialize)]
pub(crate) struct HitsResponse {
    hits: Vec<HitDoc>,
}

fn check_k(k: usize) -> Result<usize, ApiError> {
    if (1..=MAX_K).contains(&k) {
        Ok(k)
    } else {
        Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "invalid_k",
            format!("k must be between 1 and {MAX_K}"),
        ))
    }
}

/// Runs blocking library work (provider calls, scans) off the async pool.
async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

pub(crate) async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route")
}

#[derive(Serialize)]
struct Created {
    session_id: String,
}

pub(crate) async fn create_session(State(state): State<AppState>) -> Response {
    let session_id = state.create_session();
    (StatusCode::CREATED, Json(Created { session_id })).into_response()
}

#[derive(Serialize)]
struct SessionDoc<'a> {
    session_id: &'a str,
    pinned: &'a [String],
    history: &'a [Interaction],
}

pub(crate) async fn get_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let session = state.session(&id)?;
    let session = session.lock().await;
    let doc = SessionDoc {
        session_id: session.id(),
        pinned: session.pinned(),
        history: session.history(),
    };
    Ok(Json(doc).into_response())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct SearchBody {
    text: String,
    k: usize,
}

pub(crate) async fn search(
    State(state): State<AppState>,
    Path(id): Path<String>,
    ApiJson(body): ApiJson<SearchBody>,
) -> Result<Json<HitsResponse>, ApiError> {
    let k = check_k(body.k)?;
    let session = state.session(&id)?;
    let catalog = state.catalog()?;
    let embedder = state.embedder();
    let mut session = session.lock_owned().await;
    blocking(move || {
        let hits = session.search(&catalog, embedder.as_ref(), &body.text, k)?;
        Ok(Json(HitsResponse {
            hits: hit_docs(&catalog, hits),
        }))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct ComposeBody {
    reference_image_id: String,
    text: String,
    k: usize,
}

pub(crate) async fn compose(
    State(state): State<AppState>,
    Path(id): Path<String>,
    ApiJson(body): ApiJson<ComposeBody>,
) -> Result<Json<HitsResponse>, ApiError> {
    let k = check_k(body.k)?;
    let session = state.session(&id)?;
    let catalog = state.catalog()?;
    let embedder = state.embedder();
    let mut session = session.lock_owned().await;
    blocking(move || {
        let hits = session.refine(
            &catalog,
            embedder.as_ref(),
            &body.reference_image_id,
            &body.text,
            k,
        )?;
        Ok(Json(HitsResponse {
            hits: hit_docs(&catalog, hits),
        }))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct PinBody {
    image_id: String,
}

#[derive(Serialize)]
pub(crate) struct PinsResponse {
    pinned: Vec<String>,
}

pub(crate) async fn pin(
    State(state): State<AppState>,
    Path(id): Path<String>,
    ApiJson(body): ApiJson<PinBody>,
) -> Result<Json<PinsResponse>, ApiError> {
    let session = state.session(&id)?;
    let catalog = state.catalog()?;
    let mut session = session.lock().await;
    session.pin(&catalog, &body.image_id)?;
    Ok(Json(PinsResponse {
        pinned: session.pinned().to_vec(),
    }))
}

fn default_k_per_query() -> usize {
    1
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct BoardBody {
    briefing: String,
    #[serde(default)]
    mode: BoardMode,
    #[serde(default = "default_k_per_query")]
    k_per_query: usize,
}

pub(crate) async fn board(
    State(state): State<AppState>,
    Path(id): Path<String>,
    ApiJson(body): ApiJson<BoardBody>,
) -> Result<Response, ApiError> {
    let k = check_k(body.k_per_query)?;
    // The session only scopes the request; boards do not read or change it.
    state.session(&id)?;
    let catalog = state.catalog()?;
    let completer = state.completer().ok_or_else(|| {
        ApiError::new(
            StatusCode::SERVICE_UNAVAILABLE,
            "llm_unavailable",
            "no language model is configured",
        )
    })?;
    let embedder = state.embedder();
    let config = state.config().clone();
    blocking(move || {
        let plan = generate_queries(
            completer.as_ref(),
            &config.story_example,
            &body.briefing,
            &config.sampling,
            &config.llm_model,
        )?;
        let board = generate_board(&catalog, embedder.as_ref(), &plan, body.mode, k)?;
        Ok(Json(board.document(Some(&plan))).into_response())
    })
    .await
}

pub(crate) async fn image(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let catalog = state.catalog()?;
    let pos = catalog.position(&id).ok_or_else(|| {
        ApiError::new(StatusCode::NOT_FOUND, "unknown_image", format!("no image {id:?}"))
    })?;
    let path = catalog.record(pos).path.clone();
    if path.starts_with("http://") || path.starts_with("https://") {
        return Ok((StatusCode::FOUND, [(header::LOCATION, path)]).into_response());
    }
    let file = resolve(state.config().image_root.as_deref(), &path);
    match tokio::fs::read(&file).await {
        Ok(bytes) => Ok((
            [(header::CONTENT_TYPE, content_type(&file))],
            Body::from(bytes),
        )
            .into_response()),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(ApiError::new(
            StatusCode::GONE,
            "image_missing",
            format!("image file for {id:?} is missing"),
        )),
        Err(e) => Err(ApiError::internal(format!("reading image {id:?}: {e}"))),
    }
}

fn resolve(root: Option<&FsPath>, path: &str) -> PathBuf {
    let p = FsPath::new(path);
    match root {
        Some(root) if p.is_relative() => root.join(p),
        _ => p.to_path_buf(),
    }
}

fn content_type(path: &FsPath) -> &'static str {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase());
    match ext.as_deref() {
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("png") => "image/png",
        Some("gif") => "image/gif",
        Some("webp") => "image/webp",
        Some("svg") => "image/svg+xml",
        Some("bmp") => "image/bmp",
        _ => "application/octet-stream",
    }
}
