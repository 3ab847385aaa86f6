//! Exact top-k retrieval over a [`Catalog`].
//!
//! Text retrieval ranks images by `cosine(query, image)`. Composed
//! retrieval ranks by `cosine(reference ⊕ text, image ⊕ image)`; for
//! unit-norm reference and text this equals the mean of the two component
//! cosines, which is what the default [`ComposedScoring::Decomposed`] path
//! computes in a single pass over each row. [`ComposedScoring::Literal`]
//! materializes both concatenations and is kept as the conformance oracle.
//!
//! Excluded ids are removed before selection, so `k` results come back
//! whenever `k` candidates remain. Ties rank by ascending byte-order id.

mod topk;

use std::thread;

use thiserror::Error;

use crate::catalog::Catalog;
use crate::vecmath::{
    concat, cosine, cosine_from_parts, dot_f32, extend, l2_normalize, Embedding, VecError,
    ZERO_NORM_EPS,
};

pub use topk::{top_k, Hit};
use topk::{to_hits, Ranked, TopK};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RetrievalError {
    #[error("dimension mismatch: catalog dim {expected}, query dim {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("no candidates: catalog is empty or fully excluded")]
    EmptyCandidateSet,
    #[error("k must be >= 1")]
    InvalidK,
    #[error("query embedding is the zero vector")]
    ZeroVector,
}

impl From<VecError> for RetrievalError {
    fn from(e: VecError) -> Self {
        match e {
            VecError::DimensionMismatch { left, right } => RetrievalError::DimensionMismatch {
                expected: left,
                actual: right,
            },
            VecError::ZeroVector | VecError::InvalidInput(_) => RetrievalError::ZeroVector,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ComposedScoring {
    /// `(cos(reference, x) + cos(text, x)) / 2`.
    #[default]
    Decomposed,
    /// `cos(reference ⊕ text, x ⊕ x)` with both concatenations built.
    Literal,
}

/// Scans smaller than this many stored values stay on the calling thread.
const PARALLEL_MIN_VALUES: usize = 1 << 21;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchOptions {
    pub composed: ComposedScoring,
    /// Upper bound on scan partitions; `0` means one per available core.
    pub workers: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            composed: ComposedScoring::Decomposed,
            workers: 0,
        }
    }
}

/// Retrieval over one catalog with fixed options.
#[derive(Debug, Clone, Copy)]
pub struct Searcher<'a> {
    catalog: &'a Catalog,
    options: SearchOptions,
}

enum Scorer {
    Text {
        query: Vec<f64>,
        norm: f64,
    },
    Decomposed {
        reference: Vec<f64>,
        reference_norm: f64,
        text: Vec<f64>,
        text_norm: f64,
    },
    Literal {
        query: Embedding,
    },
}

impl<'a> Searcher<'a> {
    pub fn new(catalog: &'a Catalog) -> Self {
        Self::with_options(catalog, SearchOptions::default())
    }

    pub fn with_options(catalog: &'a Catalog, options: SearchOptions) -> Self {
        Self { catalog, options }
    }

    pub fn text<S: AsRef<str>>(
        &self,
        query: &Embedding,
        k: usize,
        exclude: &[S],
    ) -> Result<Vec<Hit>, RetrievalError> {
        self.check_dim(query)?;
        let norm = query.norm();
        if norm < ZERO_NORM_EPS {
            return Err(RetrievalError::ZeroVector);
        }
        let scorer = Scorer::Text {
            query: query.values().to_vec(),
            norm,
        };
        self.run(&scorer, k, exclude)
    }

    /// Both inputs are L2-normalized before scoring.
    pub fn composed<S: AsRef<str>>(
        &self,
        reference: &Embedding,
        text: &Embedding,
        k: usize,
        exclude: &[S],
    ) -> Result<Vec<Hit>, RetrievalError> {
        self.check_dim(reference)?;
        self.check_dim(text)?;
        let reference = l2_normalize(reference)?;
        let text = l2_normalize(text)?;
        let scorer = match self.options.composed {
            ComposedScoring::Decomposed => Scorer::Decomposed {
                reference_norm: reference.norm(),
                text_norm: text.norm(),
                reference: reference.into_values(),
                text: text.into_values(),
            },
            ComposedScoring::Literal => Scorer::Literal {
                query: concat(&reference, &text),
            },
        };
        self.run(&scorer, k, exclude)
    }

    fn check_dim(&self, e: &Embedding) -> Result<(), RetrievalError> {
        if e.dim() != self.catalog.dim() {
            return Err(RetrievalError::DimensionMismatch {
                expected: self.catalog.dim(),
                actual: e.dim(),
            });
        }
        Ok(())
    }

    fn run<S: AsRef<str>>(
        &self,
        scorer: &Scorer,
        k: usize,
        exclude: &[S],
    ) -> Result<Vec<Hit>, RetrievalError> {
        if k == 0 {
            return Err(RetrievalError::InvalidK);
        }
        let n = self.catalog.len();
        let mut excluded = vec![false; n];
        let mut excluded_count = 0;
        for id in exclude {
            if let Some(pos) = self.catalog.position(id.as_ref()) {
                if !excluded[pos] {
                    excluded[pos] = true;
                    excluded_count += 1;
                }
            }
        }
        if excluded_count == n {
            return Err(RetrievalError::EmptyCandidateSet);
        }

        let parts = self.partitions();
        let top = if parts <= 1 {
            let mut top = TopK::new(k);
            self.scan(scorer, 0..n, &excluded, &mut top);
            top
        } else {
            let chunk = n.div_ceil(parts);
            thread::scope(|s| {
                let handles: Vec<_> = (0..n)
                    .step_by(chunk)
                    .map(|start| {
                        let excluded = &excluded;
                        s.spawn(move || {
                            let mut top = TopK::new(k);
                            self.scan(scorer, start..(start + chunk).min(n), excluded, &mut top);
                            top
                        })
                    })
                    .collect();
                let mut merged = TopK::new(k);
                for h in handles {
                    merged.merge(h.join().expect("scan worker panicked"));
                }
                merged
            })
        };
        Ok(to_hits(top.into_sorted()))
    }

    fn partitions(&self) -> usize {
        let values = self.catalog.len() * self.catalog.dim();
        let requested = match self.options.workers {
            0 if values < PARALLEL_MIN_VALUES => 1,
            0 => thread::available_parallelism().map_or(1, |n| n.get()),
            n => n,
        };
        requested.clamp(1, self.catalog.len().max(1))
    }

    fn scan<'c>(
        &self,
        scorer: &Scorer,
        range: std::ops::Range<usize>,
        excluded: &[bool],
        top: &mut TopK<'c>,
    ) where
        'a: 'c,
    {
        let catalog: &'c Catalog = self.catalog;
        let norms = catalog.norms();
        let mut emit = |pos: usize, score: f64| {
            if !excluded[pos] {
                top.push(Ranked {
                    score,
                    id: &catalog.record(pos).id,
                });
            }
        };
        match scorer {
            Scorer::Text { query, norm } => {
                let mut pos = range.start;
                while pos + 4 <= range.end {
                    let dots = dot4(query, catalog, pos);
                    for (i, d) in dots.into_iter().enumerate() {
                        emit(pos + i, cosine_from_parts(d, *norm, norms[pos + i]));
                    }
                    pos += 4;
                }
                for pos in pos..range.end {
                    let d = dot_f32(query, catalog.row(pos));
                    emit(pos, cosine_from_parts(d, *norm, norms[pos]));
                }
            }
            Scorer::Decomposed {
                reference,
                reference_norm,
                text,
                text_norm,
            } => {
                for pos in range {
                    let (dr, dt) = dot_pair(reference, text, catalog.row(pos));
                    let nx = norms[pos];
                    let score = (cosine_from_parts(dr, *reference_norm, nx)
                        + cosine_from_parts(dt, *text_norm, nx))
                        / 2.0;
                    emit(pos, score);
                }
            }
            Scorer::Literal { query } => {
                for pos in range {
                    let image = extend(&catalog.embedding(pos));
                    let score = cosine(query, &image).expect("validated dims and norms");
                    emit(pos, score);
                }
            }
        }
    }
}

/// Four row dots at once. Each accumulator sums in index order, so every
/// result is bit-identical to [`dot_f32`] on its row.
#[inline]
fn dot4(query: &[f64], catalog: &Catalog, pos: usize) -> [f64; 4] {
    let n = query.len();
    let r0 = &catalog.row(pos)[..n];
    let r1 = &catalog.row(pos + 1)[..n];
    let r2 = &catalog.row(pos + 2)[..n];
    let r3 = &catalog.row(pos + 3)[..n];
    let mut acc = [0.0f64; 4];
    for j in 0..n {
        let q = query[j];
        acc[0] += q * f64::from(r0[j]);
        acc[1] += q * f64::from(r1[j]);
        acc[2] += q * f64::from(r2[j]);
        acc[3] += q * f64::from(r3[j]);
    }
    acc
}

#[inline]
fn dot_pair(a: &[f64], b: &[f64], row: &[f32]) -> (f64, f64) {
    let n = row.len();
    let (a, b) = (&a[..n], &b[..n]);
    let mut da = 0.0f64;
    let mut db = 0.0f64;
    for j in 0..n {
        let x = f64::from(row[j]);
        da += a[j] * x;
        db += b[j] * x;
    }
    (da, db)
}

/// Top-k images by cosine similarity to `query`.
pub fn retrieve_text<S: AsRef<str>>(
    catalog: &Catalog,
    query: &Embedding,
    k: usize,
    exclude: &[S],
) -> Result<Vec<Hit>, RetrievalError> {
    Searcher::new(catalog).text(query, k, exclude)
}

/// Top-k images for a reference image embedding modified by a text
/// embedding.
pub fn retrieve_composed<S: AsRef<str>>(
    catalog: &Catalog,
    reference: &Embedding,
    text: &Embedding,
    k: usize,
    exclude: &[S],
) -> Result<Vec<Hit>, RetrievalError> {
    Searcher::new(catalog).composed(reference, text, k, exclude)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::ImageRecord;

    const NONE: &[&str] = &[];

    fn e(v: &[f64]) -> Embedding {
        Embedding::new(v.to_vec()).unwrap()
    }

    fn catalog(rows: &[(&str, &[f64])]) -> Catalog {
        Catalog::from_entries(
            rows[0].1.len(),
            rows.iter()
                .map(|(id, v)| {
                    (
                        ImageRecord::new(*id, format!("{id}.jpg"), "", vec![]).unwrap(),
                        l2_normalize(&e(v)).unwrap(),
                    )
                })
                .collect(),
        )
        .unwrap()
    }

    fn ids(hits: &[Hit]) -> Vec<&str> {
        hits.iter().map(|h| h.image_id.as_str()).collect()
    }

    #[test]
    fn exact_match_and_exclusion() {
        let c = catalog(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0])]);
        let hits = retrieve_text(&c, &e(&[1.0, 0.0]), 1, NONE).unwrap();
        assert_eq!(hits, [Hit { image_id: "a".into(), score: 1.0, rank: 1 }]);
        let hits = retrieve_text(&c, &e(&[1.0, 0.0]), 2, &["a"]).unwrap();
        assert_eq!(hits, [Hit { image_id: "b".into(), score: 0.0, rank: 1 }]);
    }

    #[test]
    fn composed_tie_goes_to_smaller_id() {
        let c = catalog(&[("b", &[0.0, 1.0]), ("a", &[1.0, 0.0])]);
        let hits = retrieve_composed(&c, &e(&[1.0, 0.0]), &e(&[0.0, 1.0]), 2, NONE).unwrap();
        assert_eq!(ids(&hits), ["a", "b"]);
        assert_eq!(hits[0].score, 0.5);
        assert_eq!(hits[1].score, 0.5);
    }

    #[test]
    fn composed_identity() {
        let c = catalog(&[("a", &[0.6, 0.8, 0.0]), ("b", &[0.0, 0.6, 0.8]), ("c", &[1.0, 0.0, 0.0])]);
        let v = c.embedding(1);
        let hits = retrieve_composed(&c, &v, &v, 1, NONE).unwrap();
        assert_eq!(hits[0].image_id, "b");
        assert!((hits[0].score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let c = catalog(&[("a", &[1.0, 0.0])]);
        assert_eq!(
            retrieve_text(&c, &e(&[1.0, 0.0, 0.0]), 1, NONE),
            Err(RetrievalError::DimensionMismatch { expected: 2, actual: 3 })
        );
        assert_eq!(
            retrieve_text(&c, &e(&[1.0, 0.0]), 1, &["a"]),
            Err(RetrievalError::EmptyCandidateSet)
        );
        assert_eq!(retrieve_text(&c, &e(&[1.0, 0.0]), 0, NONE), Err(RetrievalError::InvalidK));
        assert_eq!(retrieve_text(&c, &e(&[0.0, 0.0]), 1, NONE), Err(RetrievalError::ZeroVector));
        assert_eq!(
            retrieve_composed(&c, &e(&[0.0, 0.0]), &e(&[1.0, 0.0]), 1, NONE),
            Err(RetrievalError::ZeroVector)
        );
        let empty = Catalog::empty(2).unwrap();
        assert_eq!(
            retrieve_text(&empty, &e(&[1.0, 0.0]), 1, NONE),
            Err(RetrievalError::EmptyCandidateSet)
        );
    }

    #[test]
    fn unknown_excluded_ids_are_ignored() {
        let c = catalog(&[("a", &[1.0, 0.0])]);
        let hits = retrieve_text(&c, &e(&[1.0, 0.0]), 3, &["zzz", "a2"]).unwrap();
        assert_eq!(ids(&hits), ["a"]);
    }

    #[test]
    fn partitioned_scan_matches_sequential() {
        let rows: Vec<(String, Vec<f64>)> = (0..37)
            .map(|i| {
                let x = i as f64;
                (format!("r{}", i % 29), vec![x.sin(), x.cos(), (x * 0.3).sin() + 0.1])
            })
            .collect();
        // Ids repeat modulo 29; keep them unique by suffixing.
        let rows: Vec<(String, Vec<f64>)> =
            rows.into_iter().enumerate().map(|(i, (id, v))| (format!("{id}-{i}"), v)).collect();
        let refs: Vec<(&str, &[f64])> = rows.iter().map(|(a, b)| (a.as_str(), b.as_slice())).collect();
        let c = catalog(&refs);
        let q = e(&[0.2, -0.4, 0.9]);
        let seq = Searcher::with_options(&c, SearchOptions { workers: 1, ..Default::default() });
        for workers in [2, 3, 5, 37, 100] {
            let par = Searcher::with_options(&c, SearchOptions { workers, ..Default::default() });
            assert_eq!(par.text(&q, 10, NONE).unwrap(), seq.text(&q, 10, NONE).unwrap());
            assert_eq!(
                par.composed(&q, &c.embedding(3), 7, &["r3-3"]).unwrap(),
                seq.composed(&q, &c.embedding(3), 7, &["r3-3"]).unwrap()
            );
        }
    }
}
