//! Mood-board assembly and interactive search sessions.

use std::fmt;
use std::str::FromStr;
use std::time::SystemTime;

use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::catalog::Catalog;
use crate::providers::{EmbedProvider, ProviderError};
use crate::retrieval::{retrieve_composed, retrieve_text, Hit, RetrievalError};
use crate::story::QueryPlan;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoardError {
    #[error("query plan is empty")]
    EmptyPlan,
    #[error("catalog is empty")]
    EmptyCatalog,
    #[error("unknown image id {0:?}")]
    UnknownImageId(String),
    #[error("image {0:?} is already pinned")]
    AlreadyPinned(String),
    #[error("query text is empty")]
    EmptyText,
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BoardMode {
    /// Every query runs text retrieval on its own.
    #[default]
    #[serde(rename = "text")]
    TextPerQuery,
    /// After the first query, each query refines the previously chosen
    /// image with composed retrieval.
    #[serde(rename = "chain")]
    ChainedCompose,
}

impl FromStr for BoardMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(BoardMode::TextPerQuery),
            "chain" => Ok(BoardMode::ChainedCompose),
            other => Err(format!("unknown board mode {other:?} (expected text or chain)")),
        }
    }
}

impl fmt::Display for BoardMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoardMode::TextPerQuery => "text",
            BoardMode::ChainedCompose => "chain",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoardItem {
    pub query: String,
    pub image_id: String,
    pub path: String,
    #[serde(serialize_with = "serialize_score")]
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct MoodBoard {
    pub briefing: String,
    pub mode: BoardMode,
    pub items: Vec<BoardItem>,
    /// Queries that found no remaining candidate, in plan order.
    pub unfilled: Vec<String>,
    pub created_at: SystemTime,
}

/// Equality ignores `created_at`.
impl PartialEq for MoodBoard {
    fn eq(&self, other: &Self) -> bool {
        self.briefing == other.briefing
            && self.mode == other.mode
            && self.items == other.items
            && self.unfilled == other.unfilled
    }
}

/// JSON export of a board, optionally with the plan that produced it.
#[derive(Debug, Serialize)]
pub struct BoardDocument<'a> {
    pub briefing: &'a str,
    pub mode: BoardMode,
    pub items: &'a [BoardItem],
    pub unfilled: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub plan: Option<PlanDocument<'a>>,
}

#[derive(Debug, Serialize)]
pub struct PlanDocument<'a> {
    pub queries: &'a [String],
    pub raw_completion: &'a str,
}

impl MoodBoard {
    pub fn document<'a>(&'a self, plan: Option<&'a QueryPlan>) -> BoardDocument<'a> {
        BoardDocument {
            briefing: &self.briefing,
            mode: self.mode,
            items: &self.items,
            unfilled: &self.unfilled,
            plan: plan.map(|p| PlanDocument {
                queries: &p.queries,
                raw_completion: &p.raw_completion,
            }),
        }
    }
}

/// Renders a score as a JSON number with exactly six decimal places.
pub fn serialize_score<S: Serializer>(score: &f64, s: S) -> Result<S::Ok, S::Error> {
    let text = format!("{:.6}", score);
    let raw = serde_json::value::RawValue::from_string(text).map_err(serde::ser::Error::custom)?;
    raw.serialize(s)
}

/// Runs every query of `plan` through retrieval, keeping up to
/// `k_per_query` new images per query. Images already on the board are
/// excluded from later queries, so board ids are pairwise distinct.
pub fn generate_board(
    catalog: &Catalog,
    embedder: &dyn EmbedProvider,
    plan: &QueryPlan,
    mode: BoardMode,
    k_per_query: usize,
) -> Result<MoodBoard, BoardError> {
    if plan.queries.is_empty() {
        return Err(BoardError::EmptyPlan);
    }
    if catalog.is_empty() {
        return Err(BoardError::EmptyCatalog);
    }
    if k_per_query == 0 {
        return Err(RetrievalError::InvalidK.into());
    }
    let mut items: Vec<BoardItem> = Vec::new();
    let mut chosen: Vec<String> = Vec::new();
    let mut unfilled = Vec::new();
    let mut previous: Option<usize> = None;

    for query in &plan.queries {
        let text = embedder.embed_text(query)?;
        let result = match (mode, previous) {
            (BoardMode::ChainedCompose, Some(pos)) => {
                retrieve_composed(catalog, &catalog.embedding(pos), &text, k_per_query, &chosen)
            }
            _ => retrieve_text(catalog, &text, k_per_query, &chosen),
        };
        let hits = match result {
            Ok(hits) => hits,
            Err(RetrievalError::EmptyCandidateSet) => {
                unfilled.push(query.clone());
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        for (i, hit) in hits.into_iter().enumerate() {
            let pos = catalog
                .position(&hit.image_id)
                .expect("hits come from the catalog");
            if i == 0 {
                previous = Some(pos);
            }
            chosen.push(hit.image_id.clone());
            items.push(BoardItem {
                query: query.clone(),
                path: catalog.record(pos).path.clone(),
                image_id: hit.image_id,
                score: hit.score,
            });
        }
    }
    Ok(MoodBoard {
        briefing: plan.briefing.clone(),
        mode,
        items,
        unfilled,
        created_at: SystemTime::now(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SessionQuery {
    Text { text: String },
    Composed { reference_image_id: String, text: String },
}

/// One search or refinement and what it returned.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Interaction {
    pub query: SessionQuery,
    pub k: usize,
    /// Pinned ids at the time of the call.
    pub excluded: Vec<String>,
    pub hits: Vec<Hit>,
}

/// Conversational search state for one user. History is append-only and
/// only records successful interactions.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    id: String,
    history: Vec<Interaction>,
    pinned: Vec<String>,
}

impl Session {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            history: Vec::new(),
            pinned: Vec::new(),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn history(&self) -> &[Interaction] {
        &self.history
    }

    pub fn pinned(&self) -> &[String] {
        &self.pinned
    }

    pub fn pin(&mut self, catalog: &Catalog, image_id: &str) -> Result<(), BoardError> {
        if catalog.position(image_id).is_none() {
            return Err(BoardError::UnknownImageId(image_id.to_owned()));
        }
        if self.pinned.iter().any(|p| p == image_id) {
            return Err(BoardError::AlreadyPinned(image_id.to_owned()));
        }
        self.pinned.push(image_id.to_owned());
        Ok(())
    }

    /// Text retrieval excluding pinned images.
    pub fn search(
        &mut self,
        catalog: &Catalog,
        embedder: &dyn EmbedProvider,
        text: &str,
        k: usize,
    ) -> Result<Vec<Hit>, BoardError> {
        let query = SessionQuery::Text {
            text: text.to_owned(),
        };
        let hits = run_query(catalog, embedder, &query, k, &self.pinned)?;
        self.record(query, k, hits.clone());
        Ok(hits)
    }

    /// Composed retrieval from a catalog image, excluding pinned images.
    pub fn refine(
        &mut self,
        catalog: &Catalog,
        embedder: &dyn EmbedProvider,
        reference_image_id: &str,
        modifier_text: &str,
        k: usize,
    ) -> Result<Vec<Hit>, BoardError> {
        let query = SessionQuery::Composed {
            reference_image_id: reference_image_id.to_owned(),
            text: modifier_text.to_owned(),
        };
        let hits = run_query(catalog, embedder, &query, k, &self.pinned)?;
        self.record(query, k, hits.clone());
        Ok(hits)
    }

    /// Re-runs every recorded interaction against `catalog`.
    pub fn replay(
        &self,
        catalog: &Catalog,
        embedder: &dyn EmbedProvider,
    ) -> Result<Vec<Vec<Hit>>, BoardError> {
        self.history
            .iter()
            .map(|i| run_query(catalog, embedder, &i.query, i.k, &i.excluded))
            .collect()
    }

    fn record(&mut self, query: SessionQuery, k: usize, hits: Vec<Hit>) {
        self.history.push(Interaction {
            query,
            k,
            excluded: self.pinned.clone(),
            hits,
        });
    }
}

fn run_query(
    catalog: &Catalog,
    embedder: &dyn EmbedProvider,
    query: &SessionQuery,
    k: usize,
    exclude: &[String],
) -> Result<Vec<Hit>, BoardError> {
    match query {
        SessionQuery::Text { text } => {
            if text.trim().is_empty() {
                return Err(BoardError::EmptyText);
            }
            let q = embedder.embed_text(text)?;
            Ok(retrieve_text(catalog, &q, k, exclude)?)
        }
        SessionQuery::Composed {
            reference_image_id,
            text,
        } => {
            let reference = catalog
                .embedding_of(reference_image_id)
                .ok_or_else(|| BoardError::UnknownImageId(reference_image_id.clone()))?;
            if text.trim().is_empty() {
                return Err(BoardError::EmptyText);
            }
            let t = embedder.embed_text(text)?;
            Ok(retrieve_composed(catalog, &reference, &t, k, exclude)?)
        }
    }
}
