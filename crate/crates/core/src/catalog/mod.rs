//! The searchable image set: records, their embeddings, and persistence.
//!
//! Embeddings are kept as one contiguous row-major `f32` array so the
//! retrieval scan walks memory linearly. Row norms are cached in `f64`.

mod store;

use std::collections::HashMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::providers::{EmbedProvider, ProviderError};
use crate::vecmath::{norm_sq_f32, Embedding};

pub use store::{load_store, read_store, write_store, StoreContents, MAGIC, VERSION};

/// Stored rows must have unit norm within this tolerance (f32 rounding).
pub const STORED_NORM_TOLERANCE: f64 = 1e-4;
pub const MAX_ID_BYTES: usize = u16::MAX as usize;

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("duplicate image id {0:?}")]
    DuplicateId(String),
    #[error("malformed manifest at line {line}: {message}")]
    MalformedManifest { line: usize, message: String },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("provider failed after {completed} record(s) embedded: {source}")]
    Provider {
        completed: usize,
        #[source]
        source: ProviderError,
    },
    #[error("dimension mismatch: catalog dim {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("embedding for {id:?} is not unit-norm (norm {norm})")]
    NotUnitNorm { id: String, norm: f64 },
    #[error("write failed: {0}")]
    SinkFailure(#[source] std::io::Error),
    #[error("read failed: {0}")]
    SourceFailure(#[source] std::io::Error),
    #[error("not a GEMB store (bad magic)")]
    BadMagic,
    #[error("unsupported store version {0}")]
    UnsupportedVersion(u16),
    #[error("unsupported store flags {0:#06x}")]
    UnsupportedFlags(u16),
    #[error("store checksum mismatch")]
    CrcMismatch,
    #[error("malformed store: {0}")]
    MalformedStore(String),
    #[error("stored id {0:?} has no manifest entry")]
    MissingMetadata(String),
}

/// One image in the catalog. Captions and tags live only in the manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: String,
    pub path: String,
    #[serde(default)]
    pub caption: String,
    #[serde(default)]
    pub tags: Vec<String>,
}

impl ImageRecord {
    pub fn new(
        id: impl Into<String>,
        path: impl Into<String>,
        caption: impl Into<String>,
        tags: Vec<String>,
    ) -> Result<Self, CatalogError> {
        let record = Self {
            id: id.into(),
            path: path.into(),
            caption: caption.into(),
            tags,
        };
        record.validate()?;
        Ok(record)
    }

    pub fn validate(&self) -> Result<(), CatalogError> {
        validate_id(&self.id)
    }
}

pub(crate) fn validate_id(id: &str) -> Result<(), CatalogError> {
    if id.is_empty() {
        return Err(CatalogError::InvalidRecord("empty id".into()));
    }
    if id.len() > MAX_ID_BYTES {
        return Err(CatalogError::InvalidRecord(format!(
            "id is {} bytes, limit is {MAX_ID_BYTES}",
            id.len()
        )));
    }
    if id.chars().any(char::is_control) {
        return Err(CatalogError::InvalidRecord(format!(
            "id {id:?} contains control characters"
        )));
    }
    Ok(())
}

/// Parses a JSON Lines manifest. Blank lines are skipped; line numbers in
/// errors are 1-based.
pub fn read_manifest(reader: impl BufRead) -> Result<Vec<ImageRecord>, CatalogError> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| CatalogError::MalformedManifest {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ImageRecord =
            serde_json::from_str(&line).map_err(|e| CatalogError::MalformedManifest {
                line: line_no,
                message: e.to_string(),
            })?;
        record
            .validate()
            .map_err(|e| CatalogError::MalformedManifest {
                line: line_no,
                message: e.to_string(),
            })?;
        records.push(record);
    }
    Ok(records)
}

/// Embedded image set. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    dim: usize,
    records: Vec<ImageRecord>,
    vectors: Vec<f32>,
    norms: Vec<f64>,
    index: HashMap<String, usize>,
}

impl Catalog {
    pub fn empty(dim: usize) -> Result<Self, CatalogError> {
        Self::from_rows(dim, Vec::new(), Vec::new())
    }

    /// Builds a catalog from records and their embeddings, narrowing values
    /// to `f32`.
    pub fn from_entries(
        dim: usize,
        entries: Vec<(ImageRecord, Embedding)>,
    ) -> Result<Self, CatalogError> {
        let mut records = Vec::with_capacity(entries.len());
        let mut vectors = Vec::with_capacity(entries.len() * dim);
        for (record, embedding) in entries {
            if embedding.dim() != dim {
                return Err(CatalogError::DimensionMismatch {
                    expected: dim,
                    actual: embedding.dim(),
                });
            }
            vectors.extend(embedding.values().iter().map(|&v| v as f32));
            records.push(record);
        }
        Self::from_rows(dim, records, vectors)
    }

    /// Builds a catalog over a flat row-major `f32` array.
    pub fn from_rows(
        dim: usize,
        records: Vec<ImageRecord>,
        vectors: Vec<f32>,
    ) -> Result<Self, CatalogError> {
        if dim == 0 {
            return Err(CatalogError::DimensionMismatch {
                expected: 1,
                actual: 0,
            });
        }
        if vectors.len() != records.len() * dim {
            return Err(CatalogError::DimensionMismatch {
                expected: records.len() * dim,
                actual: vectors.len(),
            });
        }
        let mut index = HashMap::with_capacity(records.len());
        let mut norms = Vec::with_capacity(records.len());
        for (pos, (record, row)) in records.iter().zip(vectors.chunks_exact(dim)).enumerate() {
            record.validate()?;
            if index.insert(record.id.clone(), pos).is_some() {
                return Err(CatalogError::DuplicateId(record.id.clone()));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(CatalogError::NotUnitNorm {
                    id: record.id.clone(),
                    norm: f64::NAN,
                });
            }
            let norm = norm_sq_f32(row).sqrt();
            if (norm - 1.0).abs() > STORED_NORM_TOLERANCE {
                return Err(CatalogError::NotUnitNorm {
                    id: record.id.clone(),
                    norm,
                });
            }
            norms.push(norm);
        }
        Ok(Self {
            dim,
            records,
            vectors,
            norms,
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[ImageRecord] {
        &self.records
    }

    pub fn record(&self, pos: usize) -> &ImageRecord {
        &self.records[pos]
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&ImageRecord> {
        self.position(id).map(|p| &self.records[p])
    }

    pub fn row(&self, pos: usize) -> &[f32] {
        &self.vectors[pos * self.dim..(pos + 1) * self.dim]
    }

    /// The stored embedding at `pos`, upcast to `f64`.
    pub fn embedding(&self, pos: usize) -> Embedding {
        Embedding::from_f32(self.row(pos)).expect("stored rows are validated")
    }

    pub fn embedding_of(&self, id: &str) -> Option<Embedding> {
        self.position(id).map(|p| self.embedding(p))
    }

    pub fn vectors(&self) -> &[f32] {
        &self.vectors
    }

    pub(crate) fn norms(&self) -> &[f64] {
        &self.norms
    }
}

/// Embeds every record with `provider`, preserving manifest order.
pub fn ingest(
    records: impl IntoIterator<Item = ImageRecord>,
    provider: &dyn EmbedProvider,
) -> Result<Catalog, CatalogError> {
    let records: Vec<ImageRecord> = records.into_iter().collect();
    let mut seen = std::collections::HashSet::with_capacity(records.len());
    for r in &records {
        r.validate()?;
        if !seen.insert(r.id.as_str()) {
            return Err(CatalogError::DuplicateId(r.id.clone()));
        }
    }
    let dim = provider.dim();
    let mut vectors = Vec::with_capacity(records.len() * dim);
    for (completed, record) in records.iter().enumerate() {
        let embedding = provider
            .embed_image(record)
            .map_err(|source| CatalogError::Provider { completed, source })?;
        if embedding.dim() != dim {
            return Err(CatalogError::Provider {
                completed,
                source: ProviderError::BadResponse(format!(
                    "expected dim {dim}, got {}",
                    embedding.dim()
                )),
            });
        }
        vectors.extend(embedding.values().iter().map(|&v| v as f32));
    }
    Catalog::from_rows(dim, records, vectors)
}
