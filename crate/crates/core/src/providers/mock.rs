use std::collections::HashMap;

use super::{
    CompletionProvider, CompletionRequest, EmbedProvider, EmbedRequest, ProviderError,
};
use crate::catalog::ImageRecord;
use crate::vecmath::{Embedding, ZERO_NORM_EPS};

const FNV_OFFSET_BASIS: u64 = 14695981039346656037;
const FNV_PRIME: u64 = 1099511628211;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET_BASIS;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// The first `n` outputs of a splitmix64 generator seeded with `seed`.
pub fn splitmix64_stream(seed: u64, n: usize) -> impl Iterator<Item = u64> {
    let mut state = seed;
    (0..n).map(move |_| {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    })
}

/// Maps the top 53 bits of `x` onto `[-1, 1)`.
fn unit_interval(x: u64) -> f64 {
    ((x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)) * 2.0 - 1.0
}

fn tokens(text: &str) -> impl Iterator<Item = String> {
    text.to_lowercase()
        .split(|c: char| !(c.is_ascii_lowercase() || c.is_ascii_digit()))
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect::<Vec<_>>()
        .into_iter()
}

/// Deterministic bag-of-tokens embedding.
///
/// Each token seeds a splitmix64 stream (via its FNV-1a hash) that yields a
/// pseudo-random direction; token directions are summed and normalized.
/// Text without tokens, or whose token vectors cancel, maps to `e0`.
///
/// # Panics
///
/// Panics if `dim == 0`.
pub fn mock_embed(text: &str, dim: usize) -> Embedding {
    assert!(dim >= 1, "mock_embed requires dim >= 1");
    let mut acc = vec![0.0f64; dim];
    let mut any = false;
    for token in tokens(text) {
        any = true;
        let seed = fnv1a64(token.as_bytes());
        for (slot, x) in acc.iter_mut().zip(splitmix64_stream(seed, dim)) {
            *slot += unit_interval(x);
        }
    }
    let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !any || norm < ZERO_NORM_EPS {
        let mut e0 = vec![0.0; dim];
        e0[0] = 1.0;
        return Embedding::new(e0).expect("basis vector is valid");
    }
    Embedding::new(acc.into_iter().map(|v| v / norm).collect())
        .expect("finite sum of finite values")
}

/// In-process embedder built on [`mock_embed`].
///
/// Image records embed as their caption and tags joined by spaces, so a
/// text query naming a tag lands near the images carrying it.
#[derive(Debug, Clone)]
pub struct MockEmbedder {
    dim: usize,
}

impl MockEmbedder {
    pub fn new(dim: usize) -> Result<Self, ProviderError> {
        if dim == 0 {
            return Err(ProviderError::InvalidRequest("dim must be >= 1".into()));
        }
        Ok(Self { dim })
    }

    pub fn record_text(record: &ImageRecord) -> String {
        std::iter::once(record.caption.as_str())
            .chain(record.tags.iter().map(String::as_str))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl EmbedProvider for MockEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, request: &EmbedRequest) -> Result<Embedding, ProviderError> {
        if request.payload().trim().is_empty() {
            return Err(ProviderError::EmptyPayload);
        }
        Ok(mock_embed(request.payload(), self.dim))
    }

    fn embed_image(&self, record: &ImageRecord) -> Result<Embedding, ProviderError> {
        Ok(mock_embed(&Self::record_text(record), self.dim))
    }
}

/// Completion provider that replays configured fixture text.
///
/// Responses are keyed by the FNV-1a hash of the prompt; a fallback, when
/// set, answers any prompt without a keyed entry.
#[derive(Debug, Clone, Default)]
pub struct MockCompleter {
    responses: HashMap<u64, String>,
    fallback: Option<String>,
}

impl MockCompleter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Answers every prompt with `completion`.
    pub fn fixed(completion: impl Into<String>) -> Self {
        Self {
            responses: HashMap::new(),
            fallback: Some(completion.into()),
        }
    }

    pub fn with_response(mut self, prompt: &str, completion: impl Into<String>) -> Self {
        self.responses
            .insert(fnv1a64(prompt.as_bytes()), completion.into());
        self
    }
}

impl CompletionProvider for MockCompleter {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        request.validate()?;
        self.responses
            .get(&fnv1a64(request.prompt.as_bytes()))
            .or(self.fallback.as_ref())
            .cloned()
            .ok_or_else(|| ProviderError::BadResponse("no fixture configured for prompt".into()))
    }
}
