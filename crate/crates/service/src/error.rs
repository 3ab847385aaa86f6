//! Mapping of library errors onto HTTP responses.
//!
//! Every library error variant maps to exactly one `(status, code)` pair:
//! 4xx when the caller can fix the request, 5xx for provider or server
//! faults.

use axum::extract::rejection::JsonRejection;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use gaudi_core::{
    BoardError, CatalogError, ProviderError, RetrievalError, StoryError, VecError,
};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

#[derive(Serialize)]
struct Body<'a> {
    code: &'a str,
    message: &'a str,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn session_not_found(id: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "session_not_found",
            format!("no session {id:?}"),
        )
    }

    pub fn catalog_unavailable() -> Self {
        Self::new(
            StatusCode::SERVICE_UNAVAILABLE,
            "catalog_unavailable",
            "no catalog is loaded",
        )
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Json(Body {
            code: self.code,
            message: &self.message,
        });
        (self.status, body).into_response()
    }
}

fn err(status: StatusCode, code: &'static str, e: impl ToString) -> ApiError {
    ApiError::new(status, code, e.to_string())
}

impl From<ProviderError> for ApiError {
    fn from(e: ProviderError) -> Self {
        use StatusCode as S;
        let (status, code) = match &e {
            ProviderError::Unavailable { .. } => (S::BAD_GATEWAY, "provider_unavailable"),
            ProviderError::BadResponse(_) => (S::BAD_GATEWAY, "provider_bad_response"),
            ProviderError::AuthFailure(_) => (S::BAD_GATEWAY, "provider_auth_failed"),
            ProviderError::EmptyPayload => (S::UNPROCESSABLE_ENTITY, "empty_text"),
            ProviderError::InvalidRequest(_) => {
                (S::INTERNAL_SERVER_ERROR, "provider_request_invalid")
            }
        };
        err(status, code, e)
    }
}

impl From<VecError> for ApiError {
    fn from(e: VecError) -> Self {
        use StatusCode as S;
        let (status, code) = match &e {
            VecError::DimensionMismatch { .. } => (S::INTERNAL_SERVER_ERROR, "dimension_mismatch"),
            VecError::ZeroVector => (S::BAD_GATEWAY, "zero_vector"),
            VecError::InvalidInput(_) => (S::UNPROCESSABLE_ENTITY, "invalid_vector"),
        };
        err(status, code, e)
    }
}

impl From<RetrievalError> for ApiError {
    fn from(e: RetrievalError) -> Self {
        use StatusCode as S;
        let (status, code) = match &e {
            // The query dimension comes from the configured provider.
            RetrievalError::DimensionMismatch { .. } => {
                (S::INTERNAL_SERVER_ERROR, "dimension_mismatch")
            }
            RetrievalError::EmptyCandidateSet => (S::UNPROCESSABLE_ENTITY, "empty_candidate_set"),
            RetrievalError::InvalidK => (S::UNPROCESSABLE_ENTITY, "invalid_k"),
            RetrievalError::ZeroVector => (S::BAD_GATEWAY, "zero_vector"),
        };
        err(status, code, e)
    }
}

impl From<StoryError> for ApiError {
    fn from(e: StoryError) -> Self {
        use StatusCode as S;
        let (status, code) = match e {
            StoryError::EmptyBriefing => (S::UNPROCESSABLE_ENTITY, "empty_briefing"),
            StoryError::InvalidExample(_) => (S::INTERNAL_SERVER_ERROR, "invalid_story_example"),
            StoryError::InvalidSampling(_) => (S::INTERNAL_SERVER_ERROR, "invalid_sampling"),
            StoryError::NoQueriesFound => (S::UNPROCESSABLE_ENTITY, "no_queries_found"),
            StoryError::Provider(p) => return p.into(),
        };
        err(status, code, e)
    }
}

impl From<BoardError> for ApiError {
    fn from(e: BoardError) -> Self {
        use StatusCode as S;
        let (status, code) = match e {
            BoardError::EmptyPlan => (S::UNPROCESSABLE_ENTITY, "empty_plan"),
            BoardError::EmptyCatalog => (S::CONFLICT, "empty_catalog"),
            BoardError::UnknownImageId(_) => (S::UNPROCESSABLE_ENTITY, "unknown_image"),
            BoardError::AlreadyPinned(_) => (S::CONFLICT, "already_pinned"),
            BoardError::EmptyText => (S::UNPROCESSABLE_ENTITY, "empty_text"),
            BoardError::Provider(p) => return p.into(),
            BoardError::Retrieval(r) => return r.into(),
        };
        err(status, code, e)
    }
}

/// Catalog errors only arise while loading; all are server faults.
impl From<CatalogError> for ApiError {
    fn from(e: CatalogError) -> Self {
        let code = match &e {
            CatalogError::DuplicateId(_) => "catalog_duplicate_id",
            CatalogError::MalformedManifest { .. } => "catalog_malformed_manifest",
            CatalogError::InvalidRecord(_) => "catalog_invalid_record",
            CatalogError::Provider { .. } => "catalog_provider_failed",
            CatalogError::DimensionMismatch { .. } => "catalog_dimension_mismatch",
            CatalogError::NotUnitNorm { .. } => "catalog_not_unit_norm",
            CatalogError::SinkFailure(_) => "catalog_write_failed",
            CatalogError::SourceFailure(_) => "catalog_read_failed",
            CatalogError::BadMagic => "catalog_bad_magic",
            CatalogError::UnsupportedVersion(_) => "catalog_unsupported_version",
            CatalogError::UnsupportedFlags(_) => "catalog_unsupported_flags",
            CatalogError::CrcMismatch => "catalog_crc_mismatch",
            CatalogError::MalformedStore(_) => "catalog_malformed_store",
            CatalogError::MissingMetadata(_) => "catalog_missing_metadata",
        };
        err(StatusCode::INTERNAL_SERVER_ERROR, code, e)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        match e {
            JsonRejection::JsonDataError(_) => {
                err(StatusCode::UNPROCESSABLE_ENTITY, "invalid_request", e.body_text())
            }
            JsonRejection::MissingJsonContentType(_) => {
                err(StatusCode::UNSUPPORTED_MEDIA_TYPE, "unsupported_media_type", e.body_text())
            }
            _ => err(StatusCode::BAD_REQUEST, "invalid_json", e.body_text()),
        }
    }
}
