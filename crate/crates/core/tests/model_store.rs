use proptest::prelude::*;
use sha2::{Digest, Sha256};
use vocab_graft_core::model::{
    escape_surface, load_canonical, save_canonical, unescape_surface, SaveOptions, SpecialSurfaces, Specials,
};
use vocab_graft_core::{NormalizerConfig, PieceKind, TokenizerModel, VocabPiece};

fn large_model(n: usize) -> TokenizerModel {
    let mut pieces = vec![VocabPiece::unknown("<unk>"), VocabPiece::control("<s>"), VocabPiece::control("</s>")];
    for i in pieces.len()..n {
        let surface = match i % 5 {
            0 => format!("▁w{i}"),
            1 => format!("ก{i}\t"),
            2 => format!("x\\{i}\n"),
            3 => format!("é{i}\r"),
            _ => format!("{i}"),
        };
        if i % 97 == 0 {
            pieces.push(VocabPiece::unscored(surface));
        } else {
            pieces.push(VocabPiece::normal(surface, -(i as f32) / 7.0));
        }
    }
    TokenizerModel::with_surfaces(pieces, &SpecialSurfaces::default(), NormalizerConfig::default()).unwrap()
}

#[test]
fn quarter_million_pieces_round_trip_bytewise() {
    let m = large_model(250_000);
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.vgm");
    let b = dir.path().join("b.vgm");
    save_canonical(&m, &a, SaveOptions::default()).unwrap();
    let loaded = load_canonical(&a).unwrap();
    assert_eq!(loaded, m);
    save_canonical(&loaded, &b, SaveOptions::default()).unwrap();
    let bytes_a = std::fs::read(&a).unwrap();
    let bytes_b = std::fs::read(&b).unwrap();
    assert_eq!(Sha256::digest(&bytes_a), Sha256::digest(&bytes_b));
    assert_eq!(m.checksum(), hex::encode(Sha256::digest(&bytes_a)));
    for (x, y) in m.pieces().iter().zip(loaded.pieces()) {
        assert_eq!(x.score.map(f32::to_bits), y.score.map(f32::to_bits));
    }
}

#[test]
fn specials_survive_round_trip() {
    let pieces = vec![
        VocabPiece::control("<pad>"),
        VocabPiece::unknown("<unk>"),
        VocabPiece::control("<mask>"),
        VocabPiece::normal("a", -1.0),
    ];
    let specials = Specials { unk: 1, mask: Some(2), pad: Some(0), bos: None, eos: None, space: None };
    let cfg = NormalizerConfig { max_char_repeat: 5, preserve_space: false, lowercase: false };
    let m = TokenizerModel::new(pieces, specials, cfg).unwrap();
    let back = TokenizerModel::parse_canonical(std::str::from_utf8(&m.to_canonical_bytes()).unwrap()).unwrap();
    assert_eq!(back.specials(), &specials);
    assert_eq!(back.normalizer(), &cfg);
    assert_eq!(back.pieces()[3].kind, PieceKind::Normal);
}

proptest! {
    #[test]
    fn escape_round_trips(s in "\\PC*|[\\t\\n\\r\\\\a∅]{0,12}") {
        let e = escape_surface(&s);
        prop_assert!(!e.contains('\t') && !e.contains('\n') && !e.contains('\r'));
        prop_assert_eq!(unescape_surface(&e).unwrap(), s);
    }

    #[test]
    fn arbitrary_models_round_trip(
        surfaces in prop::collection::btree_set("[a-zก-ฮ▁\\t\\\\😀]{1,6}", 1..40),
        scores in prop::collection::vec(-30.0f32..0.0, 40),
    ) {
        let mut pieces = vec![VocabPiece::unknown("<unk>")];
        for (i, s) in surfaces.into_iter().enumerate() {
            if s == "<unk>" { continue; }
            pieces.push(if i % 4 == 3 { VocabPiece::unscored(s) } else { VocabPiece::normal(s, scores[i]) });
        }
        let m = TokenizerModel::with_surfaces(pieces, &SpecialSurfaces::default(), NormalizerConfig::default()).unwrap();
        let bytes = m.to_canonical_bytes();
        let back = TokenizerModel::parse_canonical(std::str::from_utf8(&bytes).unwrap()).unwrap();
        prop_assert_eq!(back.to_canonical_bytes(), bytes);
        prop_assert_eq!(back, m);
    }
}
