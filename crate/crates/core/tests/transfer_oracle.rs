mod common;

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vocab_graft_core::model::SpecialSurfaces;
use vocab_graft_core::transfer::THAI_BLOCK;
use vocab_graft_core::{
    transfer, EmojiSet, NormalizerConfig, PieceKind, ScalarRange, TokenizerModel, TransferError, TransferPolicy,
    VocabPiece,
};

fn model(pieces: Vec<VocabPiece>) -> TokenizerModel {
    TokenizerModel::with_surfaces(pieces, &SpecialSurfaces::default(), NormalizerConfig::default()).unwrap()
}

/// Independent statement of the expected appended pieces, built from plain
/// set operations.
fn expected_tail(
    recipient: &TokenizerModel,
    donor: &TokenizerModel,
    excluded: &[ScalarRange],
    emoji: Option<&EmojiSet>,
) -> Vec<(String, Option<u32>, PieceKind)> {
    let mut present: HashSet<&str> = recipient.pieces().iter().map(|p| p.surface.as_str()).collect();
    let mut tail = Vec::new();
    for p in donor.pieces() {
        let thai = p.surface.chars().any(|c| excluded.iter().any(|r| (r.lo..=r.hi).contains(&(c as u32))));
        if p.kind == PieceKind::Normal && !present.contains(p.surface.as_str()) && !thai {
            present.insert(&p.surface);
            tail.push((p.surface.clone(), p.score.map(f32::to_bits), PieceKind::Normal));
        }
    }
    if let Some(set) = emoji {
        let mut seqs: Vec<Vec<char>> = set.iter().map(|s| s.chars().collect()).collect();
        seqs.sort();
        let present: HashSet<String> = present.into_iter().map(str::to_string).chain(tail.iter().map(|t| t.0.clone())).collect();
        for s in seqs {
            let s: String = s.into_iter().collect();
            if !present.contains(&s) {
                tail.push((s, None, PieceKind::Unscored));
            }
        }
    }
    tail
}

#[test]
fn hand_checked_example() {
    let recipient = model(vec![
        VocabPiece::unknown("<unk>"),
        VocabPiece::normal("a", -1.0),
        VocabPiece::normal("b", -2.0),
        VocabPiece::normal("กข", -3.0),
    ]);
    let donor = model(vec![
        VocabPiece::unknown("<unk>"),
        VocabPiece::normal("a", -0.5),
        VocabPiece::normal("c", -4.25),
        VocabPiece::normal("กc", -1.0),
        VocabPiece::normal("x", -7.125),
    ]);
    let mut policy = TransferPolicy::default();
    policy.inject_emoji = false;
    let (out, report) = transfer(&recipient, &donor, &policy, &EmojiSet::empty()).unwrap();
    assert_eq!(report.copied, 2);
    assert_eq!(report.skipped_duplicate, 1);
    assert_eq!(report.skipped_script, 1);
    assert_eq!(report.skipped_control, 1);
    assert_eq!((report.recipient_size_before, report.recipient_size_after), (4, 6));
    assert_eq!(report.boundary_id, 4);
    let tail: Vec<_> = out.pieces()[4..].iter().map(|p| (p.surface.as_str(), p.score)).collect();
    assert_eq!(tail, [("c", Some(-4.25)), ("x", Some(-7.125))]);

    let emoji = EmojiSet::from_sequences(["😀", "x"], "t");
    let (out, report) = transfer(&recipient, &donor, &TransferPolicy::default(), &emoji).unwrap();
    assert_eq!(report.emoji_added, 1);
    assert_eq!(out.len(), 7);
    assert_eq!(out.pieces()[6], VocabPiece::unscored("😀"));
}

#[test]
fn randomized_pairs_match_set_oracle() {
    let alphabet = ['a', 'b', 'c', 'ก', 'ข', '\u{0E7F}', '\u{0E80}', '😀', 'é'];
    let emoji = EmojiSet::from_sequences(["😀", "👍", "👍🏽", "a"], "t");
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..300 {
        let (n_recipient, n_donor) = (rng.random_range(0..30), rng.random_range(0..60));
        let recipient = common::random_model(&mut rng, &alphabet, n_recipient, 3);
        let mut donor_pieces: Vec<VocabPiece> = common::random_model(&mut rng, &alphabet, n_donor, 3)
            .into_parts()
            .0;
        donor_pieces.push(VocabPiece::control("<s>"));
        let donor = model(donor_pieces);
        let inject = rng.random_bool(0.5);
        let copy_scores = rng.random_bool(0.8);
        let policy = TransferPolicy::new(vec![THAI_BLOCK], copy_scores, inject).unwrap();
        let (out, report) = transfer(&recipient, &donor, &policy, &emoji).unwrap();
        report.check().unwrap();
        assert_eq!(&out.pieces()[..recipient.len()], recipient.pieces());
        assert_eq!(out.specials(), recipient.specials());
        let expected = expected_tail(&recipient, &donor, &[THAI_BLOCK], inject.then_some(&emoji));
        let actual: Vec<_> = out.pieces()[recipient.len()..]
            .iter()
            .map(|p| (p.surface.clone(), p.score.map(f32::to_bits), p.kind))
            .collect();
        if copy_scores {
            assert_eq!(actual, expected);
        } else {
            let strip = |v: &[(String, Option<u32>, PieceKind)]| v.iter().map(|t| (t.0.clone(), t.2)).collect::<Vec<_>>();
            assert_eq!(strip(&actual), strip(&expected));
        }
    }
}

#[test]
fn empty_emoji_set_is_rejected_only_when_injecting() {
    let m = model(vec![VocabPiece::unknown("<unk>")]);
    assert!(matches!(
        transfer(&m, &m, &TransferPolicy::default(), &EmojiSet::empty()),
        Err(TransferError::EmptyEmojiSet)
    ));
    let mut off = TransferPolicy::default();
    off.inject_emoji = false;
    let (out, report) = transfer(&m, &m, &off, &EmojiSet::empty()).unwrap();
    assert_eq!(out, m);
    assert_eq!(report.skipped_control, 1);
}

#[test]
fn overlapping_blocks_are_rejected() {
    let a: ScalarRange = "0E00..0E7F".parse().unwrap();
    let b: ScalarRange = "U+0E50..U+0EFF".parse().unwrap();
    assert!(matches!(TransferPolicy::new(vec![a, b], true, true), Err(TransferError::OverlappingRanges(..))));
    assert!("0E7F..0E00".parse::<ScalarRange>().is_err());
}
