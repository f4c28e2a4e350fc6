#![allow(dead_code)]

use std::collections::HashMap;

use rand::Rng;
use vocab_graft_core::model::SpecialSurfaces;
use vocab_graft_core::{NormalizerConfig, PieceKind, TokenizerModel, VocabPiece};

/// Exhaustive segmentation: every split of `chars` into normal pieces, or
/// single-character unknowns where no one-character piece exists. Returns the
/// best `(unk_count, score)` ranking fewer unknowns first, then higher score,
/// with scores summed left to right in f64.
pub fn brute_best(chars: &[char], model: &TokenizerModel) -> (usize, f64) {
    let normal: HashMap<String, f32> = model
        .pieces()
        .iter()
        .filter(|p| p.kind == PieceKind::Normal)
        .map(|p| (p.surface.clone(), p.score.unwrap()))
        .collect();
    let max_len = normal.keys().map(|s| s.chars().count()).max().unwrap_or(1);
    let mut best: Option<(usize, f64)> = None;
    let mut stack = vec![(0usize, 0usize, 0.0f64)];
    while let Some((pos, unk, score)) = stack.pop() {
        if pos == chars.len() {
            let better = match best {
                None => true,
                Some((bu, bs)) => unk < bu || (unk == bu && score > bs),
            };
            if better {
                best = Some((unk, score));
            }
            continue;
        }
        let mut single = false;
        for len in 1..=max_len.min(chars.len() - pos) {
            let s: String = chars[pos..pos + len].iter().collect();
            if let Some(&sc) = normal.get(&s) {
                single |= len == 1;
                stack.push((pos + len, unk, score + f64::from(sc)));
            }
        }
        if !single {
            stack.push((pos + 1, unk + 1, score));
        }
    }
    best.unwrap_or((0, 0.0))
}

/// A model with `<unk>` at id 0 and random-scored normal pieces drawn from
/// `alphabet`, with lengths 1..=max_len.
pub fn random_model<R: Rng>(rng: &mut R, alphabet: &[char], size: usize, max_len: usize) -> TokenizerModel {
    let mut pieces = vec![VocabPiece::unknown("<unk>")];
    let mut seen = std::collections::HashSet::new();
    let mut attempts = 0;
    while pieces.len() < size + 1 && attempts < size * 50 {
        attempts += 1;
        let len = rng.random_range(1..=max_len);
        let s: String = (0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect();
        if seen.insert(s.clone()) {
            let score = -rng.random_range(0.0f32..10.0).max(f32::MIN_POSITIVE);
            pieces.push(VocabPiece::normal(s, score));
        }
    }
    TokenizerModel::with_surfaces(pieces, &SpecialSurfaces::default(), NormalizerConfig::default()).unwrap()
}
