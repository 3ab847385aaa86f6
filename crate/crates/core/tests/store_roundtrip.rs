use gaudi_core::catalog::{load_store, read_store, write_store, Catalog, CatalogError};
use proptest::prelude::*;
use rand::Rng;

mod common;

fn bytes_of(c: &Catalog) -> Vec<u8> {
    let mut out = Vec::new();
    write_store(c, &mut out).unwrap();
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn write_load_write_is_byte_identical(seed in any::<u64>(), n in 0usize..60, dim in 1usize..24) {
        let mut rng = common::rng(seed);
        let c = common::random_catalog(&mut rng, n, dim);
        let bytes = bytes_of(&c);
        let loaded = load_store(&bytes[..], c.records().to_vec()).unwrap();
        prop_assert_eq!(&loaded, &c);
        prop_assert_eq!(bytes_of(&loaded), bytes);
    }

    #[test]
    fn any_flipped_bit_after_magic_is_caught(seed in any::<u64>(), n in 1usize..20, dim in 1usize..8) {
        let mut rng = common::rng(seed);
        let c = common::random_catalog(&mut rng, n, dim);
        let mut bytes = bytes_of(&c);
        let at = rng.gen_range(4..bytes.len());
        bytes[at] ^= 1 << rng.gen_range(0..8);
        prop_assert!(matches!(read_store(&bytes), Err(CatalogError::CrcMismatch)));
    }
}

#[test]
fn loaded_values_equal_f32_of_ingested() {
    let mut rng = common::rng(42);
    let c = common::random_catalog(&mut rng, 30, 12);
    let loaded = load_store(&bytes_of(&c)[..], c.records().to_vec()).unwrap();
    for pos in 0..c.len() {
        assert_eq!(loaded.row(pos), c.row(pos));
        assert_eq!(loaded.record(pos), c.record(pos));
    }
}
