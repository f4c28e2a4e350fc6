//! Vocabulary transfer from a donor unigram model into a recipient.
//!
//! The output keeps every recipient piece at its original id, then appends
//! donor `Normal` pieces that pass the filters (in donor id order, scores
//! copied bit for bit), then emoji sequences not yet present as `Unscored`
//! pieces in code-point order. The first appended id is the boundary between
//! existing and added vocabulary.

use std::collections::HashSet;
use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emoji::EmojiSet;
use crate::model::{ModelError, PieceKind, TokenId, TokenizerModel, VocabPiece};

/// Thai block, U+0E00..U+0E7F.
pub const THAI_BLOCK: ScalarRange = ScalarRange {
    lo: 0x0E00,
    hi: 0x0E7F,
};

#[derive(Debug, Error)]
pub enum TransferError {
    #[error("excluded ranges {0} and {1} overlap")]
    OverlappingRanges(ScalarRange, ScalarRange),
    #[error("malformed range {0}")]
    BadRange(String),
    #[error("emoji injection is enabled but the emoji set is empty")]
    EmptyEmojiSet,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Inclusive range of Unicode scalar values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ScalarRange {
    pub lo: u32,
    pub hi: u32,
}

impl ScalarRange {
    pub fn contains(&self, c: char) -> bool {
        (self.lo..=self.hi).contains(&(c as u32))
    }

    pub fn as_range(&self) -> RangeInclusive<u32> {
        self.lo..=self.hi
    }
}

impl fmt::Display for ScalarRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04X}..{:04X}", self.lo, self.hi)
    }
}

impl FromStr for ScalarRange {
    type Err = TransferError;

    /// Parses `0E00..0E7F` (hex, optional `U+` prefixes) or a single scalar.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || TransferError::BadRange(s.to_string());
        let hex = |h: &str| {
            let h = h.trim();
            let h = h
                .strip_prefix("U+")
                .or_else(|| h.strip_prefix("u+"))
                .unwrap_or(h);
            u32::from_str_radix(h, 16).map_err(|_| bad())
        };
        let (lo, hi) = match s.split_once("..") {
            Some((lo, hi)) => (hex(lo)?, hex(hi)?),
            None => {
                let v = hex(s)?;
                (v, v)
            }
        };
        if lo > hi || hi > char::MAX as u32 {
            return Err(bad());
        }
        Ok(ScalarRange { lo, hi })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransferPolicy {
    excluded_blocks: Vec<ScalarRange>,
    pub copy_scores: bool,
    pub inject_emoji: bool,
}

impl Default for TransferPolicy {
    fn default() -> Self {
        Self {
            excluded_blocks: vec![THAI_BLOCK],
            copy_scores: true,
            inject_emoji: true,
        }
    }
}

impl TransferPolicy {
    pub fn new(
        mut excluded_blocks: Vec<ScalarRange>,
        copy_scores: bool,
        inject_emoji: bool,
    ) -> Result<Self, TransferError> {
        if let Some(r) = excluded_blocks.iter().find(|r| r.lo > r.hi) {
            return Err(TransferError::BadRange(r.to_string()));
        }
        excluded_blocks.sort();
        for w in excluded_blocks.windows(2) {
            if w[1].lo <= w[0].hi {
                return Err(TransferError::OverlappingRanges(w[0], w[1]));
            }
        }
        Ok(Self {
            excluded_blocks,
            copy_scores,
            inject_emoji,
        })
    }

    pub fn excluded_blocks(&self) -> &[ScalarRange] {
        &self.excluded_blocks
    }
}

/// True when `surface` must be excluded: any scalar falls in an excluded block.
pub fn script_filter(surface: &str, policy: &TransferPolicy) -> bool {
    surface
        .chars()
        .any(|c| policy.excluded_blocks.iter().any(|r| r.contains(c)))
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TransferReport {
    pub recipient_size_before: usize,
    pub donor_size: usize,
    pub copied: usize,
    pub skipped_duplicate: usize,
    pub skipped_script: usize,
    pub skipped_control: usize,
    pub emoji_added: usize,
    pub recipient_size_after: usize,
    pub boundary_id: TokenId,
    pub emoji_source_version: String,
    pub warnings: Vec<String>,
}

impl TransferReport {
    /// Checks the bookkeeping identities; returns the first violated one.
    pub fn check(&self) -> Result<(), String> {
        if self.recipient_size_after != self.recipient_size_before + self.copied + self.emoji_added {
            return Err("size_after != size_before + copied + emoji_added".into());
        }
        if self.copied + self.skipped_duplicate + self.skipped_script + self.skipped_control
            != self.donor_size
        {
            return Err("donor partition does not sum to donor_size".into());
        }
        if self.boundary_id as usize != self.recipient_size_before {
            return Err("boundary_id != recipient_size_before".into());
        }
        Ok(())
    }
}

pub fn transfer(
    recipient: &TokenizerModel,
    donor: &TokenizerModel,
    policy: &TransferPolicy,
    emoji: &EmojiSet,
) -> Result<(TokenizerModel, TransferReport), TransferError> {
    if policy.inject_emoji && emoji.is_empty() {
        return Err(TransferError::EmptyEmojiSet);
    }
    let mut report = TransferReport {
        recipient_size_before: recipient.len(),
        donor_size: donor.len(),
        boundary_id: recipient.len() as TokenId,
        ..Default::default()
    };
    let mut pieces: Vec<VocabPiece> = recipient.pieces().to_vec();
    let mut seen: HashSet<String> = pieces.iter().map(|p| p.surface.clone()).collect();

    if !donor.pieces().iter().any(|p| p.kind == PieceKind::Normal) {
        report
            .warnings
            .push("donor has no normal pieces; nothing to transfer".into());
    }

    // without score copying, new pieces sit at the recipient's floor
    let floor = recipient
        .pieces()
        .iter()
        .filter(|p| p.kind == PieceKind::Normal)
        .filter_map(|p| p.score)
        .reduce(f32::min)
        .unwrap_or(0.0);

    for piece in donor.pieces() {
        if piece.kind != PieceKind::Normal {
            report.skipped_control += 1;
        } else if seen.contains(&piece.surface) {
            report.skipped_duplicate += 1;
        } else if script_filter(&piece.surface, policy) {
            report.skipped_script += 1;
        } else {
            seen.insert(piece.surface.clone());
            let score = if policy.copy_scores {
                piece.score
            } else {
                Some(floor)
            };
            pieces.push(VocabPiece {
                surface: piece.surface.clone(),
                score,
                kind: PieceKind::Normal,
            });
            report.copied += 1;
        }
    }

    if policy.inject_emoji {
        report.emoji_source_version = emoji.source_version.clone();
        for seq in emoji.iter() {
            if seen.insert(seq.clone()) {
                pieces.push(VocabPiece::unscored(seq));
                report.emoji_added += 1;
            }
        }
    }

    report.recipient_size_after = pieces.len();
    let model = TokenizerModel::new(pieces, *recipient.specials(), *recipient.normalizer())?;
    debug_assert!(report.check().is_ok());
    Ok((model, report))
}
