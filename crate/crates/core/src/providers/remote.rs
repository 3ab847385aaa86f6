use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{
    CompletionProvider, CompletionRequest, EmbedKind, EmbedProvider, EmbedRequest, ProviderError,
};
use crate::vecmath::{l2_normalize, Embedding};

/// Backoff schedule for transport-level failures.
///
/// The number of retries is `delays.len()`; a request is attempted at most
/// `delays.len() + 1` times.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetryPolicy {
    pub delays: Vec<Duration>,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            delays: vec![Duration::from_millis(100), Duration::from_millis(400)],
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        Self { delays: Vec::new() }
    }
}

fn agent() -> ureq::Agent {
    ureq::AgentBuilder::new()
        .timeout_connect(Duration::from_secs(10))
        .timeout(Duration::from_secs(120))
        .build()
}

fn parse_retry_after(resp: &ureq::Response) -> Option<Duration> {
    resp.header("Retry-After")
        .and_then(|v| v.trim().parse::<u64>().ok())
        .map(Duration::from_secs)
}

/// POSTs a JSON body, retrying transport errors and 408/429/5xx statuses.
fn post_json(
    agent: &ureq::Agent,
    url: &str,
    bearer: Option<&str>,
    body: &str,
    retry: &RetryPolicy,
) -> Result<String, ProviderError> {
    let mut attempt = 0usize;
    loop {
        let mut req = agent.post(url).set("Content-Type", "application/json");
        if let Some(key) = bearer {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        let (message, retry_after) = match req.send_string(body) {
            Ok(resp) => {
                return resp
                    .into_string()
                    .map_err(|e| ProviderError::BadResponse(format!("unreadable body: {e}")))
            }
            Err(ureq::Error::Status(code @ (401 | 403), resp)) => {
                let detail = resp.into_string().unwrap_or_default();
                return Err(ProviderError::AuthFailure(format!("HTTP {code}: {detail}")));
            }
            Err(ureq::Error::Status(code, resp)) if code == 408 || code == 429 || code >= 500 => {
                (format!("HTTP {code}"), parse_retry_after(&resp))
            }
            Err(ureq::Error::Status(code, resp)) => {
                let detail = resp.into_string().unwrap_or_default();
                return Err(ProviderError::BadResponse(format!("HTTP {code}: {detail}")));
            }
            Err(ureq::Error::Transport(t)) => (t.to_string(), None),
        };
        match retry.delays.get(attempt) {
            Some(delay) => {
                thread::sleep(*delay);
                attempt += 1;
            }
            None => {
                return Err(ProviderError::Unavailable {
                    message,
                    attempts: attempt as u32 + 1,
                    retry_after,
                })
            }
        }
    }
}

/// Client for an embedding sidecar speaking
/// `{"kind","payload"} -> {"values":[...]}`.
#[derive(Clone)]
pub struct RemoteEmbedder {
    agent: ureq::Agent,
    url: String,
    dim: usize,
    retry: RetryPolicy,
}

#[derive(Serialize)]
struct WireEmbedRequest<'a> {
    kind: EmbedKind,
    payload: &'a str,
}

#[derive(Deserialize)]
struct WireEmbedResponse {
    values: Vec<f64>,
}

impl RemoteEmbedder {
    pub fn new(url: impl Into<String>, dim: usize) -> Result<Self, ProviderError> {
        if dim == 0 {
            return Err(ProviderError::InvalidRequest("dim must be >= 1".into()));
        }
        Ok(Self {
            agent: agent(),
            url: url.into(),
            dim,
            retry: RetryPolicy::default(),
        })
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

impl EmbedProvider for RemoteEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, request: &EmbedRequest) -> Result<Embedding, ProviderError> {
        if request.payload().trim().is_empty() {
            return Err(ProviderError::EmptyPayload);
        }
        let body = serde_json::to_string(&WireEmbedRequest {
            kind: request.kind(),
            payload: request.payload(),
        })
        .expect("serializable");
        let text = post_json(&self.agent, &self.url, None, &body, &self.retry)?;
        let wire: WireEmbedResponse = serde_json::from_str(&text)
            .map_err(|e| ProviderError::BadResponse(format!("invalid embedding JSON: {e}")))?;
        if wire.values.len() != self.dim {
            return Err(ProviderError::BadResponse(format!(
                "expected dim {}, got {}",
                self.dim,
                wire.values.len()
            )));
        }
        let raw = Embedding::new(wire.values)
            .map_err(|e| ProviderError::BadResponse(e.to_string()))?;
        l2_normalize(&raw).map_err(|e| ProviderError::BadResponse(e.to_string()))
    }
}

/// OpenAI-compatible text completion client.
#[derive(Clone)]
pub struct RemoteCompleter {
    agent: ureq::Agent,
    url: String,
    api_key: Option<String>,
    retry: RetryPolicy,
}

#[derive(Serialize)]
struct WireCompletionRequest<'a> {
    model: &'a str,
    prompt: &'a str,
    temperature: f64,
    top_p: f64,
    max_tokens: u32,
    frequency_penalty: f64,
    presence_penalty: f64,
}

#[derive(Deserialize)]
struct WireCompletionResponse {
    #[serde(default)]
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    text: Option<String>,
}

impl RemoteCompleter {
    /// `url` is the full completions endpoint, e.g.
    /// `https://api.openai.com/v1/completions`.
    pub fn new(url: impl Into<String>, api_key: Option<String>) -> Self {
        Self {
            agent: agent(),
            url: url.into(),
            api_key: api_key.filter(|k| !k.trim().is_empty()),
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// The exact JSON body sent for `request`.
    pub fn wire_body(request: &CompletionRequest) -> String {
        let s = &request.sampling;
        serde_json::to_string(&WireCompletionRequest {
            model: &request.model_id,
            prompt: &request.prompt,
            temperature: s.temperature,
            top_p: s.top_p,
            max_tokens: s.max_tokens,
            frequency_penalty: s.frequency_penalty,
            presence_penalty: s.presence_penalty,
        })
        .expect("serializable")
    }
}

impl CompletionProvider for RemoteCompleter {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ProviderError> {
        request.validate()?;
        let key = self
            .api_key
            .as_deref()
            .ok_or_else(|| ProviderError::AuthFailure("no API key configured".into()))?;
        let body = Self::wire_body(request);
        let text = post_json(&self.agent, &self.url, Some(key), &body, &self.retry)?;
        let wire: WireCompletionResponse = serde_json::from_str(&text)
            .map_err(|e| ProviderError::BadResponse(format!("invalid completion JSON: {e}")))?;
        match wire.choices.into_iter().next().and_then(|c| c.text) {
            Some(t) if !t.is_empty() => Ok(t),
            Some(_) => Err(ProviderError::BadResponse("empty completion".into())),
            None => Err(ProviderError::BadResponse("response has no choices".into())),
        }
    }
}
