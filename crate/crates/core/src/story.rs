//! Briefing-to-queries generation with a single-shot prompt.
//!
//! The prompt is one worked example (briefing followed by the designer's
//! queries, one per line) and then the new briefing. The model is expected
//! to continue with queries of the form `I'm looking for ...`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::providers::{CompletionProvider, CompletionRequest, ProviderError};

const QUERY_PREFIX_TAIL: &str = "'m looking for";
const NEXT_BRIEFING_MARKER: &str = "You're designing";
const BRIEFING_ARROW: &str = " =>";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StoryError {
    #[error("briefing is empty")]
    EmptyBriefing,
    #[error("invalid story example: {0}")]
    InvalidExample(String),
    #[error("invalid sampling config: {0}")]
    InvalidSampling(String),
    #[error("no queries found in completion")]
    NoQueriesFound,
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// LLM sampling parameters. Defaults: temperature 0.7, top_p 1.0,
/// max_tokens 80, no penalties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    pub frequency_penalty: f64,
    pub presence_penalty: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            temperature: 0.7,
            top_p: 1.0,
            max_tokens: 80,
            frequency_penalty: 0.0,
            presence_penalty: 0.0,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<(), StoryError> {
        let bad = |m: String| Err(StoryError::InvalidSampling(m));
        if !(0.0..=2.0).contains(&self.temperature) {
            return bad(format!("temperature {} outside [0, 2]", self.temperature));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return bad(format!("top_p {} outside (0, 1]", self.top_p));
        }
        if self.max_tokens == 0 {
            return bad("max_tokens must be >= 1".into());
        }
        for (name, v) in [
            ("frequency_penalty", self.frequency_penalty),
            ("presence_penalty", self.presence_penalty),
        ] {
            if !(-2.0..=2.0).contains(&v) {
                return bad(format!("{name} {v} outside [-2, 2]"));
            }
        }
        Ok(())
    }
}

/// A worked briefing → queries example used to condition the model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoryExample {
    pub briefing: String,
    pub queries: Vec<String>,
}

impl StoryExample {
    pub fn new(briefing: impl Into<String>, queries: Vec<String>) -> Result<Self, StoryError> {
        let example = Self {
            briefing: briefing.into(),
            queries,
        };
        example.validate()?;
        Ok(example)
    }

    /// The coffee-brand example a professional designer wrote by hand.
    pub fn coffee_brand() -> Self {
        serde_json::from_str(include_str!("../fixtures/coffee_example.json"))
            .expect("bundled example parses")
    }

    pub fn validate(&self) -> Result<(), StoryError> {
        let line = |s: &str, what: &str| -> Result<(), StoryError> {
            if s.trim().is_empty() {
                return Err(StoryError::InvalidExample(format!("{what} is empty")));
            }
            if s.contains(['\n', '\r']) {
                return Err(StoryError::InvalidExample(format!("{what} spans lines")));
            }
            Ok(())
        };
        line(&self.briefing, "briefing")?;
        if self.queries.is_empty() {
            return Err(StoryError::InvalidExample("no queries".into()));
        }
        for q in &self.queries {
            line(q, "query")?;
        }
        Ok(())
    }
}

/// Queries generated for one briefing, with the raw completion kept for audit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryPlan {
    pub briefing: String,
    pub queries: Vec<String>,
    pub raw_completion: String,
}

/// Builds the single-shot prompt.
///
/// Layout, LF-terminated lines with no trailing whitespace:
///
/// ```text
/// <example briefing> =>
/// <example query 1>
/// ...
/// <new briefing> =>
/// ```
pub fn build_prompt(example: &StoryExample, new_briefing: &str) -> Result<String, StoryError> {
    example.validate()?;
    let new_briefing = new_briefing.trim();
    if new_briefing.is_empty() {
        return Err(StoryError::EmptyBriefing);
    }
    // A multi-line briefing would be indistinguishable from example queries.
    let new_briefing = new_briefing.split_whitespace().collect::<Vec<_>>().join(" ");

    let mut prompt = String::new();
    prompt.push_str(example.briefing.trim());
    prompt.push_str(BRIEFING_ARROW);
    prompt.push('\n');
    for q in &example.queries {
        prompt.push_str(q.trim());
        prompt.push('\n');
    }
    prompt.push_str(&new_briefing);
    prompt.push_str(BRIEFING_ARROW);
    prompt.push('\n');
    Ok(prompt)
}

fn is_query(sentence: &str) -> bool {
    let mut chars = sentence.chars();
    matches!(chars.next(), Some('I' | 'i')) && chars.as_str().starts_with(QUERY_PREFIX_TAIL)
}

/// Extracts `I'm looking for ...` queries from a model completion.
///
/// Sentences end at `.` or at a line break. A line-break-terminated
/// sentence gets a trailing `.`; a fragment cut off at the end of the text
/// (no terminator) is dropped. Parsing stops at the first sentence starting
/// with `You're designing`, where the model has begun inventing a briefing.
/// Order and duplicates are preserved.
pub fn parse_queries(completion: &str) -> Result<Vec<String>, StoryError> {
    let mut out = Vec::new();
    'lines: for raw_line in completion.split_inclusive('\n') {
        let ends_line = raw_line.ends_with('\n');
        let line = raw_line.trim_end_matches(['\n', '\r']);
        let mut rest = line;
        loop {
            let (sentence, terminated) = match rest.find('.') {
                Some(pos) => {
                    let s = &rest[..=pos];
                    rest = &rest[pos + 1..];
                    (s.trim(), true)
                }
                None => {
                    let s = rest.trim();
                    rest = "";
                    (s, ends_line)
                }
            };
            if sentence.starts_with(NEXT_BRIEFING_MARKER) {
                break 'lines;
            }
            if terminated && is_query(sentence) {
                let mut q = sentence.to_owned();
                if !q.ends_with('.') {
                    q.push('.');
                }
                out.push(q);
            }
            if rest.trim().is_empty() {
                break;
            }
        }
    }
    if out.is_empty() {
        return Err(StoryError::NoQueriesFound);
    }
    Ok(out)
}

/// Prompt → completion → parsed queries.
pub fn generate_queries(
    llm: &dyn CompletionProvider,
    example: &StoryExample,
    briefing: &str,
    sampling: &SamplingConfig,
    model_id: &str,
) -> Result<QueryPlan, StoryError> {
    sampling.validate()?;
    let prompt = build_prompt(example, briefing)?;
    let request = CompletionRequest::new(prompt, *sampling, model_id)?;
    let raw_completion = llm.complete(&request)?;
    let queries = parse_queries(&raw_completion)?;
    Ok(QueryPlan {
        briefing: briefing.trim().to_owned(),
        queries,
        raw_completion,
    })
}
