//! Emoji sequence sets loaded from Unicode emoji data files.
//!
//! Accepts the line format shared by `emoji-sequences.txt`,
//! `emoji-zwj-sequences.txt` and `emoji-test.txt`:
//!
//! ```text
//! 231A..231B    ; Basic_Emoji  ; watch..hourglass done   # E0.6
//! 0023 FE0F 20E3 ; Emoji_Keycap_Sequence ; keycap: #     # E0.6
//! 1F600          ; fully-qualified                        # 😀 E1.0 grinning face
//! ```
//!
//! Ranges (`A..B`) expand to one single-scalar sequence per code point.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use thiserror::Error;

/// Unicode 15.1 `emoji-test.txt`, used when no data file is supplied.
pub const PINNED_EMOJI_DATA: &str = include_str!("../../../data/emoji-test-15.1.txt");

#[derive(Debug, Error)]
pub enum EmojiError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EmojiSet {
    /// Kept in code-point order; iteration order is the injection order.
    sequences: BTreeSet<Vec<char>>,
    pub source_version: String,
}

impl EmojiSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_sequences<I, S>(seqs: I, source_version: impl Into<String>) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let sequences = seqs
            .into_iter()
            .map(|s| s.as_ref().chars().collect::<Vec<_>>())
            .filter(|s| !s.is_empty())
            .collect();
        Self {
            sequences,
            source_version: source_version.into(),
        }
    }

    pub fn pinned() -> Self {
        Self::parse(PINNED_EMOJI_DATA).expect("pinned emoji data parses")
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn contains(&self, seq: &str) -> bool {
        // BTreeSet<Vec<char>> has no borrowed lookup from &str
        self.sequences.contains(&seq.chars().collect::<Vec<_>>())
    }

    /// Sequences as strings, in code-point order.
    pub fn iter(&self) -> impl Iterator<Item = String> + '_ {
        self.sequences.iter().map(|s| s.iter().collect())
    }

    pub fn max_len(&self) -> usize {
        self.sequences.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn merge(&mut self, other: EmojiSet) {
        self.sequences.extend(other.sequences);
        if self.source_version.is_empty() {
            self.source_version = other.source_version;
        } else if !other.source_version.is_empty() && other.source_version != self.source_version {
            self.source_version = format!("{}+{}", self.source_version, other.source_version);
        }
    }

    pub fn parse(text: &str) -> Result<Self, EmojiError> {
        let mut set = EmojiSet::empty();
        for (n, line) in text.lines().enumerate() {
            let lineno = n + 1;
            let trimmed = line.trim();
            if let Some(comment) = trimmed.strip_prefix('#') {
                if set.source_version.is_empty() {
                    if let Some(v) = comment.trim().strip_prefix("Version:") {
                        set.source_version = v.trim().to_string();
                    }
                }
                continue;
            }
            let data = trimmed.split('#').next().unwrap_or("").trim();
            if data.is_empty() {
                continue;
            }
            let field = data.split(';').next().unwrap_or("").trim();
            if field.is_empty() {
                return Err(EmojiError::Parse {
                    line: lineno,
                    message: "missing code point field".into(),
                });
            }
            parse_field(field, lineno, &mut set.sequences)?;
        }
        Ok(set)
    }
}

pub fn load_emoji_set(path: impl AsRef<Path>) -> Result<EmojiSet, EmojiError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| EmojiError::Io {
        path: path.display().to_string(),
        source,
    })?;
    EmojiSet::parse(&text)
}

fn parse_scalar(hex: &str, lineno: usize) -> Result<char, EmojiError> {
    u32::from_str_radix(hex, 16)
        .ok()
        .and_then(char::from_u32)
        .ok_or_else(|| EmojiError::Parse {
            line: lineno,
            message: format!("invalid code point {hex:?}"),
        })
}

fn parse_field(
    field: &str,
    lineno: usize,
    out: &mut BTreeSet<Vec<char>>,
) -> Result<(), EmojiError> {
    if let Some((lo, hi)) = field.split_once("..") {
        let lo = parse_scalar(lo.trim(), lineno)? as u32;
        let hi = parse_scalar(hi.trim(), lineno)? as u32;
        if lo > hi {
            return Err(EmojiError::Parse {
                line: lineno,
                message: format!("reversed range {field}"),
            });
        }
        // surrogates cannot appear in a range of emoji scalars
        out.extend((lo..=hi).filter_map(char::from_u32).map(|c| vec![c]));
        return Ok(());
    }
    let seq = field
        .split_whitespace()
        .map(|h| parse_scalar(h, lineno))
        .collect::<Result<Vec<_>, _>>()?;
    out.insert(seq);
    Ok(())
}
