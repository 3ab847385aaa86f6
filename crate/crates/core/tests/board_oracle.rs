use gaudi_core::board::{generate_board, BoardMode, Session};
use gaudi_core::catalog::{ingest, read_manifest, Catalog, ImageRecord};
use gaudi_core::providers::{EmbedProvider, MockEmbedder};
use gaudi_core::story::{parse_queries, QueryPlan};

mod common;
use common::*;

const DIM: usize = 64;

fn demo() -> (Catalog, MockEmbedder) {
    let mock = MockEmbedder::new(DIM).unwrap();
    let records = read_manifest(include_str!("../fixtures/demo_manifest.jsonl").as_bytes()).unwrap();
    (ingest(records, &mock).unwrap(), mock)
}

fn plan(queries: Vec<String>) -> QueryPlan {
    QueryPlan { briefing: "b".into(), queries, raw_completion: String::new() }
}

#[test]
fn yoga_plan_fills_seven_distinct_tiles() {
    let (c, mock) = demo();
    let queries = parse_queries(include_str!("../fixtures/yoga_completion.txt")).unwrap();
    for mode in [BoardMode::TextPerQuery, BoardMode::ChainedCompose] {
        let board = generate_board(&c, &mock, &plan(queries.clone()), mode, 1).unwrap();
        assert_eq!(board.items.len(), 7);
        let mut ids: Vec<_> = board.items.iter().map(|i| i.image_id.clone()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 7);
        let item_queries: Vec<_> = board.items.iter().map(|i| i.query.clone()).collect();
        assert_eq!(item_queries, queries);
    }
}

/// Each step must equal brute-force retrieval with everything chosen so far
/// excluded.
#[test]
fn text_mode_matches_stepwise_oracle() {
    let (c, mock) = demo();
    let queries: Vec<String> =
        ["water", "water", "yoga", "yoga", "cheerful puppies"].iter().map(|s| s.to_string()).collect();
    let board = generate_board(&c, &mock, &plan(queries.clone()), BoardMode::TextPerQuery, 1).unwrap();
    let mut chosen: Vec<String> = Vec::new();
    for (item, q) in board.items.iter().zip(&queries) {
        let expected = brute_text(&c, &mock.embed_text(q).unwrap(), 1, &chosen);
        assert_eq!(item.image_id, expected[0].0);
        assert!((item.score - expected[0].1).abs() <= 1e-12);
        chosen.push(item.image_id.clone());
    }
    assert_ne!(board.items[0].image_id, board.items[1].image_id);
}

#[test]
fn chain_mode_matches_stepwise_oracle() {
    let (c, mock) = demo();
    let queries = parse_queries(include_str!("../fixtures/yoga_completion.txt")).unwrap();
    let board = generate_board(&c, &mock, &plan(queries.clone()), BoardMode::ChainedCompose, 1).unwrap();
    let mut chosen: Vec<String> = Vec::new();
    for (i, (item, q)) in board.items.iter().zip(&queries).enumerate() {
        let t = mock.embed_text(q).unwrap();
        let expected = if i == 0 {
            brute_text(&c, &t, 1, &chosen)
        } else {
            let reference = c.embedding_of(chosen.last().unwrap()).unwrap();
            brute_composed(&c, &reference, &t, 1, &chosen)
        };
        assert_eq!(item.image_id, expected[0].0, "step {i}");
        chosen.push(item.image_id.clone());
    }
}

#[test]
fn long_plan_exhausts_small_catalog_without_error() {
    let mock = MockEmbedder::new(DIM).unwrap();
    let records: Vec<_> = (0..5)
        .map(|i| ImageRecord::new(format!("i{i}"), "p", format!("thing {i}"), vec![]).unwrap())
        .collect();
    let c = ingest(records, &mock).unwrap();
    let queries: Vec<String> = (0..12).map(|i| format!("query {i}")).collect();
    for mode in [BoardMode::TextPerQuery, BoardMode::ChainedCompose] {
        let board = generate_board(&c, &mock, &plan(queries.clone()), mode, 1).unwrap();
        assert_eq!(board.items.len(), 5);
        assert_eq!(board.unfilled, queries[5..]);
    }
}

#[test]
fn boards_are_reproducible() {
    let (c, mock) = demo();
    let queries = parse_queries(include_str!("../fixtures/yoga_completion.txt")).unwrap();
    let a = generate_board(&c, &mock, &plan(queries.clone()), BoardMode::ChainedCompose, 2).unwrap();
    let b = generate_board(&c, &mock, &plan(queries), BoardMode::ChainedCompose, 2).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        serde_json::to_string(&a.document(None)).unwrap(),
        serde_json::to_string(&b.document(None)).unwrap()
    );
}

#[test]
fn refine_with_own_caption_matches_composed_oracle() {
    let (c, mock) = demo();
    let mut s = Session::new("s");
    let reference = c.record(10).clone();
    let hits = s.refine(&c, &mock, &reference.id, &reference.caption, 5).unwrap();
    let expected = brute_composed(
        &c,
        &c.embedding(10),
        &mock.embed_text(&reference.caption).unwrap(),
        5,
        &[],
    );
    assert_eq!(ids(hits.iter().map(|h| &h.image_id)), ids(expected.iter().map(|e| &e.0)));
}

#[test]
fn pinned_images_never_come_back() {
    let (c, mock) = demo();
    let mut s = Session::new("s");
    let first = s.search(&c, &mock, "yoga", 3).unwrap();
    s.pin(&c, &first[0].image_id).unwrap();
    let again = s.search(&c, &mock, "yoga", 10).unwrap();
    assert!(again.iter().all(|h| h.image_id != first[0].image_id));
    let refined = s.refine(&c, &mock, &first[0].image_id, "more cheerful", 10).unwrap();
    assert!(refined.iter().all(|h| h.image_id != first[0].image_id));
    assert_eq!(s.replay(&c, &mock).unwrap(), vec![first, again, refined]);
}
