//! The mock embedder against frozen output of the standalone Python
//! reference in `fixtures/mock_embed_oracle.py`.

use gaudi_core::providers::{fnv1a64, mock_embed, splitmix64_stream, EmbedProvider, MockEmbedder};
use serde_json::Value;

fn golden() -> Value {
    serde_json::from_str(include_str!("../fixtures/mock_embed_golden.json")).unwrap()
}

#[test]
fn hash_primitives_match_reference() {
    let g = golden();
    for (text, expected) in g["fnv1a64"].as_object().unwrap() {
        let expected: u64 = expected.as_str().unwrap().parse().unwrap();
        assert_eq!(fnv1a64(text.as_bytes()), expected, "{text:?}");
    }
    let expected: Vec<u64> = g["splitmix64_seed0"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().parse().unwrap())
        .collect();
    assert_eq!(splitmix64_stream(0, 3).collect::<Vec<_>>(), expected);
}

#[test]
fn embeddings_match_reference_bit_for_bit() {
    for case in golden()["embeddings"].as_array().unwrap() {
        let text = case["text"].as_str().unwrap();
        let dim = case["dim"].as_u64().unwrap() as usize;
        let expected: Vec<f64> = case["values"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_str().unwrap().parse().unwrap())
            .collect();
        let got = mock_embed(text, dim);
        assert_eq!(got.values(), expected.as_slice(), "{text:?} dim {dim}");
    }
}

#[test]
fn punctuation_and_case_do_not_matter() {
    let m = MockEmbedder::new(64).unwrap();
    let a = m.embed_text("Puppy!!").unwrap();
    let b = m.embed_text("puppy").unwrap();
    assert_eq!(a, b);
    let a2 = m.embed_text("puppy").unwrap();
    assert_eq!(
        a2.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        b.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn outputs_are_unit_norm_with_configured_dim() {
    for dim in [1, 3, 64, 512] {
        let m = MockEmbedder::new(dim).unwrap();
        for text in ["a", "I'm looking for photos of puppies.", "x y z 1 2 3"] {
            let e = m.embed_text(text).unwrap();
            assert_eq!(e.dim(), dim);
            assert!((e.norm() - 1.0).abs() <= 1e-6);
        }
    }
}
