use gaudi_core::retrieval::{
    retrieve_composed, retrieve_text, top_k, ComposedScoring, Hit, SearchOptions, Searcher,
};
use gaudi_core::vecmath::{concat, cosine, extend, l2_normalize};
use rand::seq::SliceRandom;
use rand::Rng;

mod common;
use common::*;

fn pairs(hits: &[Hit]) -> Vec<(String, f64)> {
    hits.iter().map(|h| (h.image_id.clone(), h.score)).collect()
}

#[test]
fn text_retrieval_matches_brute_force() {
    let mut rng = rng(1);
    for round in 0..60 {
        let n = rng.gen_range(1..400);
        let dim = rng.gen_range(1..48);
        let c = random_catalog(&mut rng, n, dim);
        let q = random_unit(&mut rng, dim);
        let k = rng.gen_range(1..20);
        let mut exclude: Vec<String> = c
            .records()
            .choose_multiple(&mut rng, n / 5)
            .map(|r| r.id.clone())
            .collect();
        exclude.push("not-in-catalog".into());
        let hits = retrieve_text(&c, &q, k, &exclude).unwrap();
        assert_eq!(pairs(&hits), brute_text(&c, &q, k, &exclude), "round {round}");
        for (i, h) in hits.iter().enumerate() {
            assert_eq!(h.rank, i + 1);
        }
    }
}

#[test]
fn two_hundred_vectors_top_ten() {
    let mut rng = rng(200);
    let c = random_catalog(&mut rng, 200, 16);
    let q = random_unit(&mut rng, 16);
    let hits = retrieve_text(&c, &q, 10, &[] as &[String]).unwrap();
    let oracle = brute_text(&c, &q, 10, &[]);
    assert_eq!(ids(hits.iter().map(|h| &h.image_id)), ids(oracle.iter().map(|o| &o.0)));
}

#[test]
fn composed_retrieval_matches_literal_brute_force() {
    let mut rng = rng(2);
    for round in 0..60 {
        let n = rng.gen_range(1..400);
        let dim = rng.gen_range(1..48);
        let c = random_catalog(&mut rng, n, dim);
        let r = random_unit(&mut rng, dim);
        let t = random_unit(&mut rng, dim);
        let k = rng.gen_range(1..20);
        let exclude: Vec<String> =
            c.records().choose_multiple(&mut rng, n / 4).map(|r| r.id.clone()).collect();
        if exclude.len() == n {
            continue;
        }
        let hits = retrieve_composed(&c, &r, &t, k, &exclude).unwrap();
        let oracle = brute_composed(&c, &r, &t, k, &exclude);
        assert_eq!(
            ids(hits.iter().map(|h| &h.image_id)),
            ids(oracle.iter().map(|o| &o.0)),
            "round {round}"
        );
        for (h, (_, s)) in hits.iter().zip(&oracle) {
            assert!((h.score - s).abs() <= 1e-9);
        }
    }
}

#[test]
fn literal_path_agrees_with_decomposed_path() {
    let mut rng = rng(3);
    for _ in 0..30 {
        let n = rng.gen_range(1..300);
        let dim = rng.gen_range(1..32);
        let c = random_catalog(&mut rng, n, dim);
        let r = random_unit(&mut rng, dim);
        let t = random_unit(&mut rng, dim);
        let fast = Searcher::new(&c).composed(&r, &t, n, &[] as &[String]).unwrap();
        let literal = Searcher::with_options(
            &c,
            SearchOptions { composed: ComposedScoring::Literal, ..Default::default() },
        )
        .composed(&r, &t, n, &[] as &[String])
        .unwrap();
        assert_eq!(fast.len(), literal.len());
        for (a, b) in fast.iter().zip(&literal) {
            assert_eq!(a.image_id, b.image_id);
            assert!((a.score - b.score).abs() <= 1e-9);
        }
    }
}

#[test]
fn decomposition_holds_per_candidate() {
    let mut rng = rng(4);
    let c = random_catalog(&mut rng, 300, 24);
    let r = random_unit(&mut rng, 24);
    let t = random_unit(&mut rng, 24);
    let q = concat(&r, &t);
    for pos in 0..c.len() {
        let x = c.embedding(pos);
        let literal = cosine(&q, &extend(&x)).unwrap();
        let averaged = (cosine(&r, &x).unwrap() + cosine(&t, &x).unwrap()) / 2.0;
        assert!((literal - averaged).abs() <= 1e-9);
    }
}

#[test]
fn scaling_the_query_keeps_the_ranking() {
    let mut rng = rng(5);
    for _ in 0..20 {
        let c = random_catalog(&mut rng, 250, 20);
        let q = random_unit(&mut rng, 20);
        let base = retrieve_text(&c, &q, 15, &[] as &[String]).unwrap();
        for alpha in [0.001, 1.0, 1000.0] {
            let scaled = retrieve_text(&c, &q.scaled(alpha).unwrap(), 15, &[] as &[String]).unwrap();
            assert_eq!(
                ids(scaled.iter().map(|h| &h.image_id)),
                ids(base.iter().map(|h| &h.image_id))
            );
            for (a, b) in scaled.iter().zip(&base) {
                assert!((a.score - b.score).abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn results_for_k_prefix_results_for_k_plus_one() {
    let mut rng = rng(6);
    let c = random_catalog(&mut rng, 120, 8);
    let q = random_unit(&mut rng, 8);
    let r = random_unit(&mut rng, 8);
    let mut prev_text = Vec::new();
    let mut prev_comp = Vec::new();
    for k in 1..=c.len() + 2 {
        let text = retrieve_text(&c, &q, k, &[] as &[String]).unwrap();
        let comp = retrieve_composed(&c, &r, &q, k, &[] as &[String]).unwrap();
        assert!(text.starts_with(&prev_text));
        assert!(comp.starts_with(&prev_comp));
        assert_eq!(text.len(), k.min(c.len()));
        prev_text = text;
        prev_comp = comp;
    }
}

#[test]
fn excluding_the_winner_never_returns_it() {
    let mut rng = rng(8);
    let c = random_catalog(&mut rng, 60, 6);
    let q = random_unit(&mut rng, 6);
    let mut exclude: Vec<String> = Vec::new();
    for _ in 0..c.len() {
        let hits = retrieve_text(&c, &q, 3, &exclude).unwrap();
        assert!(hits.iter().all(|h| !exclude.contains(&h.image_id)));
        exclude.push(hits[0].image_id.clone());
    }
    assert!(retrieve_text(&c, &q, 3, &exclude).is_err());
}

#[test]
fn repeated_calls_are_bit_identical() {
    let mut rng = rng(9);
    let c = random_catalog(&mut rng, 500, 32);
    let q = random_unit(&mut rng, 32);
    let r = random_unit(&mut rng, 32);
    let a = retrieve_composed(&c, &r, &q, 25, &[] as &[String]).unwrap();
    let b = retrieve_composed(&c, &r, &q, 25, &[] as &[String]).unwrap();
    let bits = |h: &[Hit]| h.iter().map(|x| x.score.to_bits()).collect::<Vec<_>>();
    assert_eq!(a, b);
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn identical_rows_tie_break_by_id() {
    let mut rng = rng(10);
    let v = l2_normalize(&random_unit(&mut rng, 5)).unwrap();
    let entries = ["m", "c", "x", "a"]
        .iter()
        .map(|id| {
            (
                gaudi_core::ImageRecord::new(*id, "p", "", vec![]).unwrap(),
                v.clone(),
            )
        })
        .collect();
    let c = gaudi_core::Catalog::from_entries(5, entries).unwrap();
    let hits = retrieve_text(&c, &random_unit(&mut rng, 5), 3, &[] as &[String]).unwrap();
    assert_eq!(ids(hits.iter().map(|h| &h.image_id)), ["a", "c", "m"]);
}

#[test]
fn top_k_matches_full_sort_on_large_streams() {
    let mut rng = rng(11);
    for _ in 0..10 {
        let len = 10_000;
        let k = rng.gen_range(1..200);
        // Coarse scores force many ties.
        let items: Vec<(String, f64)> = (0..len)
            .map(|i| (format!("{:05}", (i * 7919) % len), (rng.gen_range(0..50) as f64) / 7.0))
            .collect();
        let hits = top_k(items.iter().map(|(s, v)| (s.as_str(), *v)), k);
        let mut sorted = items.clone();
        sorted.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        sorted.truncate(k);
        assert_eq!(pairs(&hits), sorted);
    }
}
