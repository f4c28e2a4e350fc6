//! Unigram segmentation.
//!
//! Normalized text is first pre-tokenized: recorded space marks become the
//! space token and the longest emoji sequence known to both the emoji set and
//! the model becomes its emoji piece. Every remaining span is segmented by
//! Viterbi over the `Normal` pieces.
//!
//! Within a span each scalar not covered by a single-scalar piece may also be
//! emitted as one `<unk>` token. Segmentations are ranked by, in order:
//! fewest `<unk>` tokens, highest total score, fewest tokens, and finally
//! the longest first piece (applied left to right). When the vocabulary can
//! cover the span, the first criterion is moot and the result is the
//! maximum-likelihood segmentation. Scores accumulate in `f64` from left to
//! right.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::emoji::EmojiSet;
use crate::model::{PieceKind, TokenId, TokenizerModel};
use crate::normalizer::{normalize, NormalizedText, SPACE_MARK};
use crate::trie::{Trie, TrieBuilder};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TokenizeError {
    #[error("token id {id} out of range for a vocabulary of {len}")]
    OutOfRange { id: TokenId, len: usize },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Encoding {
    pub ids: Vec<TokenId>,
    pub surfaces: Vec<String>,
    /// Byte ranges into the normalized text.
    pub offsets: Vec<(usize, usize)>,
    pub unk_count: usize,
}

impl Encoding {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Raw token produced by the segmenter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token {
    pub id: TokenId,
    pub start: usize,
    pub end: usize,
}

/// Segmenter prepared from a model and an emoji set. Cheap to share across
/// threads.
pub struct Tokenizer<'m> {
    model: &'m TokenizerModel,
    pieces: Trie<(TokenId, f32)>,
    emoji: Trie<TokenId>,
    /// Bytes 0..128 are covered by a single-scalar normal piece.
    ascii_covered: [bool; 128],
}

#[derive(Debug, Clone, Copy)]
struct PathKey {
    unk: u32,
    score: f64,
    tokens: u32,
}

impl PathKey {
    const START: PathKey = PathKey {
        unk: 0,
        score: 0.0,
        tokens: 0,
    };

    fn extend(self, unk: bool, score: f32) -> PathKey {
        PathKey {
            unk: self.unk + unk as u32,
            score: self.score + f64::from(score),
            tokens: self.tokens + 1,
        }
    }

    /// `Greater` means better.
    fn rank(&self, other: &PathKey) -> Ordering {
        other
            .unk
            .cmp(&self.unk)
            .then_with(|| self.score.total_cmp(&other.score))
            .then_with(|| other.tokens.cmp(&self.tokens))
    }

    fn same(&self, other: &PathKey) -> bool {
        self.unk == other.unk
            && self.score.to_bits() == other.score.to_bits()
            && self.tokens == other.tokens
    }
}

#[derive(Debug, Clone, Copy)]
struct Edge {
    end: usize,
    id: TokenId,
    score: f32,
    unk: bool,
}

impl<'m> Tokenizer<'m> {
    pub fn new(model: &'m TokenizerModel, emoji: &EmojiSet) -> Self {
        let mut pieces = TrieBuilder::default();
        let mut ascii_covered = [false; 128];
        for (id, p) in model.pieces().iter().enumerate() {
            if p.kind == PieceKind::Normal {
                let score = p.score.expect("normal pieces carry a score");
                pieces.insert(p.surface.as_bytes(), (id as TokenId, score));
                if p.surface.len() == 1 {
                    ascii_covered[p.surface.as_bytes()[0] as usize] = true;
                }
            }
        }
        // Matching runs on normalized text, so each sequence is keyed by its
        // normalized form (lowercasing maps U+24C2 to U+24DC, for one). An
        // exact match keeps priority if two sequences normalize alike.
        let mut keyed: BTreeMap<String, (bool, TokenId)> = BTreeMap::new();
        for seq in emoji.iter() {
            let Some(id) = model.id_of(&seq) else { continue };
            let kind = model.pieces()[id as usize].kind;
            if !matches!(kind, PieceKind::Normal | PieceKind::Unscored) {
                continue;
            }
            let key = normalize(&seq, model.normalizer()).text;
            let exact = key == seq;
            match keyed.get(&key) {
                Some(&(true, _)) => {}
                Some(_) if !exact => {}
                _ => {
                    keyed.insert(key, (exact, id));
                }
            }
        }
        let mut emoji_trie = TrieBuilder::default();
        for (key, (_, id)) in &keyed {
            emoji_trie.insert(key.as_bytes(), *id);
        }
        Self {
            model,
            pieces: pieces.build(),
            emoji: emoji_trie.build(),
            ascii_covered,
        }
    }

    pub fn model(&self) -> &'m TokenizerModel {
        self.model
    }

    /// Normalizes with the model's own config, then encodes.
    pub fn encode_str(&self, raw: &str) -> Encoding {
        self.encode(&normalize(raw, self.model.normalizer()))
    }

    pub fn encode(&self, text: &NormalizedText) -> Encoding {
        let mut tokens = Vec::new();
        self.encode_tokens(text, &mut tokens);
        let unk = self.model.unk_id();
        let pieces = self.model.pieces();
        Encoding {
            ids: tokens.iter().map(|t| t.id).collect(),
            surfaces: tokens
                .iter()
                .map(|t| pieces[t.id as usize].surface.clone())
                .collect(),
            offsets: tokens.iter().map(|t| (t.start, t.end)).collect(),
            unk_count: tokens.iter().filter(|t| t.id == unk).count(),
        }
    }

    /// Appends tokens for `text` to `out`.
    pub fn encode_tokens(&self, text: &NormalizedText, out: &mut Vec<Token>) {
        let s = text.text.as_str();
        let bytes = s.as_bytes();
        let space_id = self.model.specials().space;
        let mut spaces = text.space_positions.iter().copied().peekable();
        let mut span_start = 0;
        let mut i = 0;
        while i < bytes.len() {
            while spaces.peek().is_some_and(|&p| p < i) {
                spaces.next();
            }
            if let (Some(space), Some(&p)) = (space_id, spaces.peek()) {
                if p == i {
                    self.viterbi(s, span_start, i, out);
                    let end = i + SPACE_MARK.len_utf8();
                    out.push(Token {
                        id: space,
                        start: i,
                        end,
                    });
                    i = end;
                    span_start = i;
                    continue;
                }
            }
            if let Some((len, id)) = self.emoji.longest_prefix(&bytes[i..]) {
                self.viterbi(s, span_start, i, out);
                out.push(Token {
                    id,
                    start: i,
                    end: i + len,
                });
                i += len;
                span_start = i;
                continue;
            }
            i += utf8_len(bytes[i]);
        }
        self.viterbi(s, span_start, bytes.len(), out);
    }

    fn edges_at(&self, text: &str, pos: usize, end: usize, out: &mut Vec<Edge>) {
        let bytes = &text.as_bytes()[pos..end];
        let char_len = utf8_len(bytes[0]);
        let mut single = false;
        self.pieces.for_each_prefix(bytes, |len, (id, score)| {
            single |= len == char_len;
            out.push(Edge {
                end: pos + len,
                id,
                score,
                unk: false,
            });
        });
        if !single {
            out.push(Edge {
                end: pos + char_len,
                id: self.model.unk_id(),
                score: 0.0,
                unk: true,
            });
        }
    }

    fn viterbi(&self, text: &str, start: usize, end: usize, out: &mut Vec<Token>) {
        if start == end {
            return;
        }
        // fast path: a single ASCII byte
        if end - start == 1 && self.ascii_covered[text.as_bytes()[start] as usize] {
            if let Some((_, (id, _))) = self.pieces.longest_prefix(&text.as_bytes()[start..end]) {
                out.push(Token { id, start, end });
                return;
            }
        }
        let n = end - start;
        let mut best: Vec<Option<PathKey>> = vec![None; n + 1];
        best[0] = Some(PathKey::START);
        // edges grouped by start position; edge_start[i]..edge_start[i + 1]
        let mut edges: Vec<Edge> = Vec::with_capacity(n * 2);
        let mut edge_start = vec![0usize; n + 2];
        for rel in 0..n {
            edge_start[rel] = edges.len();
            let Some(key) = best[rel] else { continue };
            let before = edges.len();
            self.edges_at(text, start + rel, end, &mut edges);
            for e in &edges[before..] {
                let next = key.extend(e.unk, e.score);
                let slot = &mut best[e.end - start];
                if slot.map_or(true, |cur| next.rank(&cur) == Ordering::Greater) {
                    *slot = Some(next);
                }
            }
        }
        edge_start[n] = edges.len();

        // positions from which an optimal-tight path reaches the end
        let mut live = vec![false; n + 1];
        live[n] = true;
        for rel in (0..n).rev() {
            let Some(key) = best[rel] else { continue };
            live[rel] = edges[edge_start[rel]..edge_start[rel + 1]].iter().any(|e| {
                let j = e.end - start;
                live[j] && key.extend(e.unk, e.score).same(&best[j].expect("reached"))
            });
        }

        let mut rel = 0;
        while rel < n {
            let key = best[rel].expect("on an optimal path");
            let chosen = edges[edge_start[rel]..edge_start[rel + 1]]
                .iter()
                .filter(|e| {
                    let j = e.end - start;
                    live[j] && key.extend(e.unk, e.score).same(&best[j].expect("reached"))
                })
                .max_by_key(|e| e.end)
                .expect("live position has a tight edge");
            out.push(Token {
                id: chosen.id,
                start: start + rel,
                end: chosen.end,
            });
            rel = chosen.end - start;
        }
    }

    /// Sum of the scores of the scored pieces in `ids`, left to right.
    pub fn score_of(&self, ids: &[TokenId]) -> f64 {
        let pieces = self.model.pieces();
        ids.iter().fold(0.0f64, |acc, &id| {
            let p = &pieces[id as usize];
            match (p.kind, p.score) {
                (PieceKind::Normal, Some(s)) => acc + f64::from(s),
                _ => acc,
            }
        })
    }
}

fn utf8_len(first: u8) -> usize {
    match first {
        0x00..=0x7f => 1,
        0xc0..=0xdf => 2,
        0xe0..=0xef => 3,
        _ => 4,
    }
}

/// One-shot encode; prefer building a [`Tokenizer`] for repeated use.
pub fn encode(model: &TokenizerModel, text: &NormalizedText, emoji: &EmojiSet) -> Encoding {
    Tokenizer::new(model, emoji).encode(text)
}

pub fn decode(model: &TokenizerModel, ids: &[TokenId]) -> Result<String, TokenizeError> {
    let space = model.specials().space;
    let mark_is_space = model.normalizer().preserve_space;
    let mut out = String::new();
    for &id in ids {
        let piece = model.piece(id).ok_or(TokenizeError::OutOfRange {
            id,
            len: model.len(),
        })?;
        if Some(id) == space {
            out.push(' ');
        } else if mark_is_space && piece.surface.contains(SPACE_MARK) {
            out.extend(
                piece
                    .surface
                    .chars()
                    .map(|c| if c == SPACE_MARK { ' ' } else { c }),
            );
        } else {
            out.push_str(&piece.surface);
        }
    }
    Ok(out)
}
