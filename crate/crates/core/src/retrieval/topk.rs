use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::Serialize;

/// One ranked result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hit {
    pub image_id: String,
    pub score: f64,
    /// 1-based.
    pub rank: usize,
}

/// A scored candidate. Ordered so that "greater" means "ranks earlier":
/// higher score first, then ascending byte-order id.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Ranked<'a> {
    pub score: f64,
    pub id: &'a str,
}

impl Ord for Ranked<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        // `+ 0.0` folds -0.0 into 0.0 so they tie.
        (self.score + 0.0)
            .total_cmp(&(other.score + 0.0))
            .then_with(|| other.id.cmp(self.id))
    }
}

impl PartialOrd for Ranked<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Ranked<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ranked<'_> {}

/// Keeps the `k` best candidates seen so far in a min-heap of size `k`.
pub(crate) struct TopK<'a> {
    k: usize,
    heap: BinaryHeap<Reverse<Ranked<'a>>>,
}

impl<'a> TopK<'a> {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            heap: BinaryHeap::with_capacity(k.saturating_add(1).min(4096)),
        }
    }

    #[inline]
    pub fn push(&mut self, item: Ranked<'a>) {
        if self.heap.len() < self.k {
            self.heap.push(Reverse(item));
        } else if let Some(Reverse(worst)) = self.heap.peek() {
            if item > *worst {
                self.heap.pop();
                self.heap.push(Reverse(item));
            }
        }
    }

    /// Best first.
    pub fn into_sorted(self) -> Vec<Ranked<'a>> {
        self.heap.into_sorted_vec().into_iter().map(|r| r.0).collect()
    }

    pub fn merge(&mut self, other: TopK<'a>) {
        for Reverse(item) in other.heap {
            self.push(item);
        }
    }
}

pub(crate) fn to_hits(ranked: Vec<Ranked<'_>>) -> Vec<Hit> {
    ranked
        .into_iter()
        .enumerate()
        .map(|(i, r)| Hit {
            image_id: r.id.to_owned(),
            score: r.score,
            rank: i + 1,
        })
        .collect()
}

/// Selects the `k` best `(id, score)` pairs: descending score, ties broken
/// by ascending byte-order id. Equivalent to a full sort truncated to `k`.
/// `k == 0` or an empty stream yields no hits.
pub fn top_k<'a, I>(scored: I, k: usize) -> Vec<Hit>
where
    I: IntoIterator<Item = (&'a str, f64)>,
{
    let mut top = TopK::new(k);
    for (id, score) in scored {
        top.push(Ranked { score, id });
    }
    to_hits(top.into_sorted())
}
