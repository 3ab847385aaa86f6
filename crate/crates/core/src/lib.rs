//! Cross-modal mood-board engine.
//!
//! - [`vecmath`]: cosine similarity, normalization and concatenation.
//! - [`providers`]: embedding and completion contracts, remote clients and
//!   deterministic mocks.
//! - [`catalog`]: the embedded image set and its binary store.
//! - [`retrieval`]: exact top-k text and composed (image + text) retrieval.
//! - [`story`]: briefing → search queries through a single-shot prompt.
//! - [`board`]: mood-board assembly and search sessions.

pub mod board;
pub mod catalog;
pub mod providers;
pub mod retrieval;
pub mod story;
pub mod vecmath;

pub use board::{generate_board, BoardError, BoardMode, MoodBoard, Session};
pub use catalog::{ingest, load_store, write_store, Catalog, CatalogError, ImageRecord};
pub use providers::{CompletionProvider, EmbedProvider, ProviderError};
pub use retrieval::{retrieve_composed, retrieve_text, Hit, RetrievalError};
pub use story::{generate_queries, QueryPlan, SamplingConfig, StoryExample, StoryError};
pub use vecmath::{Embedding, VecError};
