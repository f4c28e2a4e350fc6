//! Synthetic models and corpora shared by the benchmarks.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vocab_graft_core::model::SpecialSurfaces;
use vocab_graft_core::{NormalizerConfig, Record, TokenizerModel, VocabPiece};

pub const LATIN: &[char] = &['a', 'e', 'i', 'o', 'n', 's', 't', 'r', 'l', 'd'];
pub const THAI: &[char] = &['ก', 'า', 'ร', 'น', 'ม', 'ส', 'ด', 'เ', 'ย', 'ว'];

/// `<unk>`, the space token, every single character of `alphabet`, then
/// random multi-character pieces up to `size` entries.
pub fn synthetic_model(seed: u64, alphabet: &[char], size: usize) -> TokenizerModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pieces = vec![VocabPiece::unknown("<unk>"), VocabPiece::control("<_>")];
    let mut seen: HashSet<String> = HashSet::new();
    for &c in alphabet {
        seen.insert(c.to_string());
        pieces.push(VocabPiece::normal(c.to_string(), -12.0));
    }
    while pieces.len() < size {
        let len = rng.random_range(2..=8);
        let mut s: String = (0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect();
        if rng.random_bool(0.3) {
            s.insert(0, '\u{2581}');
        }
        if seen.insert(s.clone()) {
            pieces.push(VocabPiece::normal(s, -rng.random_range(1.0f32..11.0)));
        }
    }
    TokenizerModel::with_surfaces(pieces, &SpecialSurfaces::default(), NormalizerConfig::default())
        .expect("synthetic model is valid")
}

/// Space-separated words over `alphabet`.
pub fn synthetic_corpus(seed: u64, alphabet: &[char], records: usize, words: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..records)
        .map(|_| {
            (0..rng.random_range(1..=words))
                .map(|_| {
                    let len = rng.random_range(1..10);
                    (0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect::<String>()
                })
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}

pub fn as_records(texts: &[String]) -> impl Iterator<Item = Result<Record, vocab_graft_core::PipelineError>> + '_ {
    texts
        .iter()
        .enumerate()
        .map(|(index, t)| Ok(Record { index, text: t.clone() }))
}
