use proptest::prelude::*;
use vocab_graft_core::embedding::{lookup, merge, split};
use vocab_graft_core::{EmbeddingError, InitScheme, Matrix, SplitEmbeddings};

fn matrix(rows: usize, cols: usize, seed: u32) -> Matrix {
    let data = (0..rows * cols)
        .map(|i| f32::from_bits((i as u32).wrapping_mul(2654435761) ^ seed) % 1e6)
        .map(|v| if v.is_finite() { v } else { 0.5 })
        .collect();
    Matrix::new(rows, cols, data).unwrap()
}

proptest! {
    #[test]
    fn split_merge_and_lookup_are_bit_exact(
        rows in 1usize..40,
        cols in 1usize..9,
        seed in any::<u32>(),
        cut in any::<prop::sample::Index>(),
        ids in prop::collection::vec(any::<prop::sample::Index>(), 0..30),
    ) {
        let m = matrix(rows, cols, seed);
        let b = 1 + cut.index(rows);
        let s = split(&m, b).unwrap();
        prop_assert!(merge(&s).bit_eq(&m));
        let ids: Vec<u32> = ids.iter().map(|i| i.index(rows) as u32).collect();
        let got = lookup(&s, &ids).unwrap();
        for (r, &id) in ids.iter().enumerate() {
            let a: Vec<u32> = got.row(r).iter().map(|v| v.to_bits()).collect();
            let e: Vec<u32> = m.row(id as usize).iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, e);
        }
    }
}

#[test]
fn file_round_trip_and_errors() {
    let m = matrix(7, 3, 9);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.emb");
    m.save(&p).unwrap();
    assert!(Matrix::load(&p).unwrap().bit_eq(&m));
    let bytes = std::fs::read(&p).unwrap();
    std::fs::write(&p, &bytes[..bytes.len() - 2]).unwrap();
    assert!(Matrix::load(&p).is_err());

    assert!(matches!(split(&m, 0), Err(EmbeddingError::BoundaryOutOfRange { .. })));
    assert!(matches!(split(&m, 8), Err(EmbeddingError::BoundaryOutOfRange { .. })));
    let s = split(&m, 7).unwrap();
    assert_eq!(s.new_table().rows(), 0);
    assert!(matches!(s.lookup(&[7]), Err(EmbeddingError::IdOutOfRange { id: 7, .. })));
    assert!(matches!(
        SplitEmbeddings::from_tables(matrix(2, 3, 0), matrix(2, 4, 0)),
        Err(EmbeddingError::WidthMismatch { .. })
    ));
}

#[test]
fn init_touches_only_new_rows_and_is_seeded() {
    let m = matrix(50, 4, 3);
    let mut a = split(&m, 40).unwrap();
    let mut b = a.clone();
    a.init_new_rows(17, InitScheme::NormalFromOldStats);
    b.init_new_rows(17, InitScheme::NormalFromOldStats);
    assert!(a.old_table().bit_eq(split(&m, 40).unwrap().old_table()));
    assert!(a.new_table().bit_eq(b.new_table()));
    assert!(a.new_table().data().iter().all(|v| v.is_finite()));
    b.init_new_rows(17, InitScheme::Zero);
    assert!(b.new_table().data().iter().all(|&v| v == 0.0));
}
