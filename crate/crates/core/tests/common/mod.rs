//! Brute-force oracles and random catalog generators shared by the
//! integration tests. Nothing here calls the retrieval or top-k code.

#![allow(dead_code)]

use gaudi_core::catalog::{Catalog, ImageRecord};
use gaudi_core::vecmath::{concat, cosine, extend, l2_normalize, Embedding};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn random_unit(rng: &mut StdRng, dim: usize) -> Embedding {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if let Ok(u) = l2_normalize(&Embedding::new(v).unwrap()) {
            return u;
        }
    }
}

/// Random catalog with shuffled ids; roughly one row in eight duplicates an
/// earlier row so that exact score ties occur.
pub fn random_catalog(rng: &mut StdRng, n: usize, dim: usize) -> Catalog {
    let mut rows: Vec<Embedding> = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 && rng.gen_ratio(1, 8) {
            let j = rng.gen_range(0..i);
            rows.push(rows[j].clone());
        } else {
            rows.push(random_unit(rng, dim));
        }
    }
    let entries = rows
        .into_iter()
        .enumerate()
        .map(|(i, e)| {
            let id = format!("{:x}-{i}", rng.gen::<u16>());
            (ImageRecord::new(id, format!("{i}.jpg"), "", vec![]).unwrap(), e)
        })
        .collect();
    Catalog::from_entries(dim, entries).unwrap()
}

/// Scores every non-excluded candidate, sorts everything, truncates.
pub fn brute_force(
    catalog: &Catalog,
    k: usize,
    exclude: &[String],
    score: impl Fn(&Embedding) -> f64,
) -> Vec<(String, f64)> {
    let mut all: Vec<(String, f64)> = (0..catalog.len())
        .filter(|&p| !exclude.contains(&catalog.record(p).id))
        .map(|p| (catalog.record(p).id.clone(), score(&catalog.embedding(p))))
        .collect();
    all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    all.truncate(k);
    all
}

pub fn brute_text(
    catalog: &Catalog,
    query: &Embedding,
    k: usize,
    exclude: &[String],
) -> Vec<(String, f64)> {
    brute_force(catalog, k, exclude, |x| cosine(query, x).unwrap())
}

/// Literal composed scoring: cos(reference ⊕ text, x ⊕ x).
pub fn brute_composed(
    catalog: &Catalog,
    reference: &Embedding,
    text: &Embedding,
    k: usize,
    exclude: &[String],
) -> Vec<(String, f64)> {
    let r = l2_normalize(reference).unwrap();
    let t = l2_normalize(text).unwrap();
    let q = concat(&r, &t);
    brute_force(catalog, k, exclude, |x| cosine(&q, &extend(x)).unwrap())
}

pub fn ids<T: AsRef<str>>(items: impl IntoIterator<Item = T>) -> Vec<String> {
    items.into_iter().map(|s| s.as_ref().to_owned()).collect()
}
