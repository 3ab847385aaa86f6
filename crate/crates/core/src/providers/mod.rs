//! Embedding and completion provider contracts.
//!
//! Each contract has a remote HTTP implementation ([`RemoteEmbedder`],
//! [`RemoteCompleter`]) and a deterministic in-process mock
//! ([`MockEmbedder`], [`MockCompleter`]).

mod mock;
mod remote;

use std::fmt;
use std::time::Duration;

use serde::Serialize;
use thiserror::Error;

use crate::catalog::ImageRecord;
use crate::story::SamplingConfig;
use crate::vecmath::Embedding;

pub use mock::{fnv1a64, mock_embed, splitmix64_stream, MockCompleter, MockEmbedder};
pub use remote::{RemoteCompleter, RemoteEmbedder, RetryPolicy};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProviderError {
    #[error("provider unavailable after {attempts} attempt(s): {message}")]
    Unavailable {
        message: String,
        attempts: u32,
        /// Server-suggested wait, when the response carried `Retry-After`.
        retry_after: Option<Duration>,
    },
    #[error("bad provider response: {0}")]
    BadResponse(String),
    #[error("authentication failure: {0}")]
    AuthFailure(String),
    #[error("empty payload")]
    EmptyPayload,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedKind {
    Text,
    Image,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EmbedRequest {
    kind: EmbedKind,
    payload: String,
}

impl EmbedRequest {
    pub fn new(kind: EmbedKind, payload: impl Into<String>) -> Result<Self, ProviderError> {
        let payload = payload.into();
        if payload.trim().is_empty() {
            return Err(ProviderError::EmptyPayload);
        }
        Ok(Self { kind, payload })
    }

    pub fn text(payload: impl Into<String>) -> Result<Self, ProviderError> {
        Self::new(EmbedKind::Text, payload)
    }

    /// An image request; the payload is the image path or URI.
    pub fn image(payload: impl Into<String>) -> Result<Self, ProviderError> {
        Self::new(EmbedKind::Image, payload)
    }

    pub fn kind(&self) -> EmbedKind {
        self.kind
    }

    pub fn payload(&self) -> &str {
        &self.payload
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub prompt: String,
    pub sampling: SamplingConfig,
    pub model_id: String,
}

impl CompletionRequest {
    pub fn new(
        prompt: impl Into<String>,
        sampling: SamplingConfig,
        model_id: impl Into<String>,
    ) -> Result<Self, ProviderError> {
        let request = Self {
            prompt: prompt.into(),
            sampling,
            model_id: model_id.into(),
        };
        request.validate()?;
        Ok(request)
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        if self.prompt.is_empty() {
            return Err(ProviderError::InvalidRequest("empty prompt".into()));
        }
        self.sampling
            .validate()
            .map_err(|e| ProviderError::InvalidRequest(e.to_string()))
    }
}

/// Maps text and images into a shared embedding space of fixed dimension.
///
/// Every returned embedding has `dim() == self.dim()` and unit L2 norm.
pub trait EmbedProvider: Send + Sync {
    fn dim(&self) -> usize;

    fn embed(&self, request: &EmbedRequest) -> Result<Embedding, ProviderError>;

    fn embed_text(&self, text: &str) -> Result<Embedding, ProviderError> {
        self.embed(&EmbedRequest::text(text)?)
    }

    fn embed_image(&self, record: &ImageRecord) -> Result<Embedding, ProviderError> {
        self.embed(&EmbedRequest::image(record.path.as_str())?)
    }
}

pub trait CompletionProvider: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError>;
}

impl fmt::Display for EmbedKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmbedKind::Text => "text",
            EmbedKind::Image => "image",
        })
    }
}
