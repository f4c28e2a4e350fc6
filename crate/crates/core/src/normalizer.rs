//! Text normalization applied before segmentation.
//!
//! Order of operations, per scalar value:
//! 1. optional simple lowercasing;
//! 2. with `preserve_space`, space, tab, newline and U+2581 all become a space;
//! 3. runs of the same scalar longer than `max_char_repeat` collapse to one;
//! 4. with `preserve_space`, each remaining space is written as [`SPACE_MARK`]
//!    and its byte offset recorded, so the tokenizer can emit the space token.

use serde::{Deserialize, Serialize};

/// Placeholder written into normalized text where a space was.
pub const SPACE_MARK: char = '\u{2581}';

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizerConfig {
    pub max_char_repeat: usize,
    pub preserve_space: bool,
    pub lowercase: bool,
}

impl Default for NormalizerConfig {
    fn default() -> Self {
        Self {
            max_char_repeat: 3,
            preserve_space: true,
            lowercase: true,
        }
    }
}

impl NormalizerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_char_repeat == 0 {
            return Err("max_char_repeat must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NormalizedText {
    pub text: String,
    /// Byte offsets into `text` of each [`SPACE_MARK`] standing in for a space.
    pub space_positions: Vec<usize>,
}

impl NormalizedText {
    /// A pre-normalized string with no space bookkeeping.
    pub fn raw(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            space_positions: Vec::new(),
        }
    }

    /// The text with every recorded space mark turned back into U+0020.
    pub fn restored(&self) -> String {
        if self.space_positions.is_empty() {
            return self.text.clone();
        }
        let mut out = String::with_capacity(self.text.len());
        let mut last = 0;
        for &pos in &self.space_positions {
            out.push_str(&self.text[last..pos]);
            out.push(' ');
            last = pos + SPACE_MARK.len_utf8();
        }
        out.push_str(&self.text[last..]);
        out
    }
}

fn is_preserved_space(c: char) -> bool {
    matches!(c, ' ' | '\t' | '\n' | SPACE_MARK)
}

/// Simple (single scalar) lowercase mapping.
fn simple_lowercase(c: char) -> char {
    if c.is_ascii() {
        return c.to_ascii_lowercase();
    }
    let mut lower = c.to_lowercase();
    match (lower.next(), lower.next()) {
        (Some(l), None) => l,
        // U+0130 is the only scalar with a multi-scalar full mapping; its
        // simple mapping is the leading scalar.
        (Some(l), Some(_)) => l,
        (None, _) => c,
    }
}

pub fn normalize(raw: &str, cfg: &NormalizerConfig) -> NormalizedText {
    let max = cfg.max_char_repeat.max(1);
    let mut out = NormalizedText {
        text: String::with_capacity(raw.len()),
        space_positions: Vec::new(),
    };

    let mut emit = |c: char, out: &mut NormalizedText| {
        if cfg.preserve_space && c == ' ' {
            out.space_positions.push(out.text.len());
            out.text.push(SPACE_MARK);
        } else {
            out.text.push(c);
        }
    };

    let mut run_char: Option<char> = None;
    let mut run_len = 0usize;
    let flush = |c: Option<char>, len: usize, out: &mut NormalizedText, emit: &mut dyn FnMut(char, &mut NormalizedText)| {
        if let Some(c) = c {
            let n = if len > max { 1 } else { len };
            for _ in 0..n {
                emit(c, out);
            }
        }
    };

    for c in raw.chars() {
        let mut c = if cfg.lowercase { simple_lowercase(c) } else { c };
        if cfg.preserve_space && is_preserved_space(c) {
            c = ' ';
        }
        if run_char == Some(c) {
            run_len += 1;
        } else {
            flush(run_char, run_len, &mut out, &mut emit);
            run_char = Some(c);
            run_len = 1;
        }
    }
    flush(run_char, run_len, &mut out, &mut emit);
    out
}
