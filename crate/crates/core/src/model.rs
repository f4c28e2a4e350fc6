//! Tokenizer model types and the canonical line-oriented text format.
//!
//! A canonical model file starts with `#key=value` header lines, followed by
//! one record per piece:
//!
//! ```text
//! #format=vocab-graft-model
//! #version=1
//! #unk_id=0
//! #max_char_repeat=3
//! #preserve_space=true
//! #lowercase=true
//! 0	<unk>	0	unknown
//! 1	a	-1	normal
//! 2	😀	∅	unscored
//! ```
//!
//! Surfaces escape `\t`, `\n`, `\r` and `\\`. The score column holds `∅` for
//! pieces that carry no score, which keeps "no score" distinct from `0`.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::normalizer::NormalizerConfig;

/// Token id. Dense in `0..model.len()`.
pub type TokenId = u32;

pub const FORMAT_NAME: &str = "vocab-graft-model";
pub const FORMAT_VERSION: u32 = 1;
pub const NO_SCORE: &str = "∅";

pub const DEFAULT_UNK: &str = "<unk>";
pub const DEFAULT_MASK: &str = "<mask>";
pub const DEFAULT_PAD: &str = "<pad>";
pub const DEFAULT_BOS: &str = "<s>";
pub const DEFAULT_EOS: &str = "</s>";
pub const DEFAULT_SPACE: &str = "<_>";

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate surface {surface:?} at id {id} (first seen at id {first})")]
    DuplicateSurface {
        surface: String,
        id: TokenId,
        first: TokenId,
    },
    #[error("special {name} refers to id {id}, but the model has {len} pieces")]
    DanglingSpecial {
        name: &'static str,
        id: TokenId,
        len: usize,
    },
    #[error("piece {id}: {message}")]
    InvalidPiece { id: TokenId, message: String },
    #[error("model must contain exactly one unknown piece, found {0}")]
    UnknownCount(usize),
    #[error("unk_id {0} does not point at the unknown piece")]
    UnkMismatch(TokenId),
    #[error("invalid normalizer config: {0}")]
    Normalizer(String),
    #[error("piece {id} has positive score {score}; pass allow_positive_scores to save it")]
    PositiveScore { id: TokenId, score: f32 },
    #[error("malformed sentencepiece model at byte {offset}: {message}")]
    Wire { offset: usize, message: String },
}

impl ModelError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        ModelError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn parse(line: usize, message: impl Into<String>) -> Self {
        ModelError::Parse {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PieceKind {
    Normal,
    Unknown,
    Control,
    /// Carried without a unigram score; only reachable through emoji matching.
    Unscored,
}

impl PieceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PieceKind::Normal => "normal",
            PieceKind::Unknown => "unknown",
            PieceKind::Control => "control",
            PieceKind::Unscored => "unscored",
        }
    }
}

impl fmt::Display for PieceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PieceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "normal" => Ok(PieceKind::Normal),
            "unknown" => Ok(PieceKind::Unknown),
            "control" => Ok(PieceKind::Control),
            "unscored" => Ok(PieceKind::Unscored),
            other => Err(format!("unknown piece kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VocabPiece {
    pub surface: String,
    pub score: Option<f32>,
    pub kind: PieceKind,
}

impl VocabPiece {
    pub fn normal(surface: impl Into<String>, score: f32) -> Self {
        Self {
            surface: surface.into(),
            score: Some(score),
            kind: PieceKind::Normal,
        }
    }

    pub fn unknown(surface: impl Into<String>) -> Self {
        Self {
            surface: surface.into(),
            score: Some(0.0),
            kind: PieceKind::Unknown,
        }
    }

    pub fn control(surface: impl Into<String>) -> Self {
        Self {
            surface: surface.into(),
            score: Some(0.0),
            kind: PieceKind::Control,
        }
    }

    pub fn unscored(surface: impl Into<String>) -> Self {
        Self {
            surface: surface.into(),
            score: None,
            kind: PieceKind::Unscored,
        }
    }

    fn validate(&self, id: TokenId) -> Result<(), ModelError> {
        let bad = |message: &str| ModelError::InvalidPiece {
            id,
            message: message.to_string(),
        };
        if self.surface.is_empty() {
            return Err(bad("empty surface"));
        }
        if self.surface.contains('\0') {
            return Err(bad("surface contains U+0000"));
        }
        if let Some(score) = self.score {
            if !score.is_finite() {
                return Err(bad("non-finite score"));
            }
        }
        match (self.kind, self.score) {
            (PieceKind::Normal, None) => Err(bad("normal piece without a score")),
            (PieceKind::Unscored, Some(_)) => Err(bad("unscored piece with a score")),
            _ => Ok(()),
        }
    }
}

/// Ids of the special tokens. Only `unk` is mandatory; the others are absent
/// when the source model does not define them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Specials {
    pub unk: TokenId,
    pub mask: Option<TokenId>,
    pub pad: Option<TokenId>,
    pub bos: Option<TokenId>,
    pub eos: Option<TokenId>,
    pub space: Option<TokenId>,
}

impl Specials {
    fn entries(&self) -> [(&'static str, Option<TokenId>); 6] {
        [
            ("unk_id", Some(self.unk)),
            ("mask_id", self.mask),
            ("pad_id", self.pad),
            ("bos_id", self.bos),
            ("eos_id", self.eos),
            ("space_id", self.space),
        ]
    }

    /// Ids that must never be chosen as replacements or masked positions.
    pub fn ids(&self) -> Vec<TokenId> {
        self.entries().iter().filter_map(|(_, id)| *id).collect()
    }
}

/// Surface strings used to locate specials when ids are not given explicitly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecialSurfaces {
    pub mask: String,
    pub pad: String,
    pub bos: String,
    pub eos: String,
    pub space: String,
}

impl Default for SpecialSurfaces {
    fn default() -> Self {
        Self {
            mask: DEFAULT_MASK.into(),
            pad: DEFAULT_PAD.into(),
            bos: DEFAULT_BOS.into(),
            eos: DEFAULT_EOS.into(),
            space: DEFAULT_SPACE.into(),
        }
    }
}

/// Immutable unigram tokenizer model.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenizerModel {
    pieces: Vec<VocabPiece>,
    index: HashMap<String, TokenId>,
    specials: Specials,
    normalizer: NormalizerConfig,
}

impl TokenizerModel {
    pub fn new(
        pieces: Vec<VocabPiece>,
        specials: Specials,
        normalizer: NormalizerConfig,
    ) -> Result<Self, ModelError> {
        normalizer.validate().map_err(ModelError::Normalizer)?;
        let index = build_index(&pieces)?;
        let unknowns = pieces
            .iter()
            .filter(|p| p.kind == PieceKind::Unknown)
            .count();
        if unknowns != 1 {
            return Err(ModelError::UnknownCount(unknowns));
        }
        for (name, id) in specials.entries() {
            if let Some(id) = id {
                if id as usize >= pieces.len() {
                    return Err(ModelError::DanglingSpecial {
                        name,
                        id,
                        len: pieces.len(),
                    });
                }
            }
        }
        if pieces[specials.unk as usize].kind != PieceKind::Unknown {
            return Err(ModelError::UnkMismatch(specials.unk));
        }
        Ok(Self {
            pieces,
            index,
            specials,
            normalizer,
        })
    }

    /// Builds a model, locating specials by kind (`unk`) and by surface
    /// (everything else). Specials whose surface is missing stay unset.
    pub fn with_surfaces(
        pieces: Vec<VocabPiece>,
        surfaces: &SpecialSurfaces,
        normalizer: NormalizerConfig,
    ) -> Result<Self, ModelError> {
        let unknowns: Vec<usize> = pieces
            .iter()
            .enumerate()
            .filter(|(_, p)| p.kind == PieceKind::Unknown)
            .map(|(i, _)| i)
            .collect();
        if unknowns.len() != 1 {
            return Err(ModelError::UnknownCount(unknowns.len()));
        }
        let find = |s: &str| {
            pieces
                .iter()
                .position(|p| p.surface == s)
                .map(|i| i as TokenId)
        };
        let specials = Specials {
            unk: unknowns[0] as TokenId,
            mask: find(&surfaces.mask),
            pad: find(&surfaces.pad),
            bos: find(&surfaces.bos),
            eos: find(&surfaces.eos),
            space: find(&surfaces.space),
        };
        Self::new(pieces, specials, normalizer)
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn pieces(&self) -> &[VocabPiece] {
        &self.pieces
    }

    pub fn piece(&self, id: TokenId) -> Option<&VocabPiece> {
        self.pieces.get(id as usize)
    }

    pub fn id_of(&self, surface: &str) -> Option<TokenId> {
        self.index.get(surface).copied()
    }

    pub fn contains(&self, surface: &str) -> bool {
        self.index.contains_key(surface)
    }

    pub fn specials(&self) -> &Specials {
        &self.specials
    }

    pub fn unk_id(&self) -> TokenId {
        self.specials.unk
    }

    pub fn normalizer(&self) -> &NormalizerConfig {
        &self.normalizer
    }

    pub fn into_parts(self) -> (Vec<VocabPiece>, Specials, NormalizerConfig) {
        (self.pieces, self.specials, self.normalizer)
    }

    /// Warning flag: scores are relative log-probabilities, so positive
    /// values are accepted on load but refused on save by default.
    pub fn positive_score_ids(&self) -> Vec<TokenId> {
        self.pieces
            .iter()
            .enumerate()
            .filter(|(_, p)| p.score.is_some_and(|s| s > 0.0))
            .map(|(i, _)| i as TokenId)
            .collect()
    }

    pub fn kind_counts(&self) -> KindCounts {
        let mut counts = KindCounts::default();
        for p in &self.pieces {
            match p.kind {
                PieceKind::Normal => counts.normal += 1,
                PieceKind::Unknown => counts.unknown += 1,
                PieceKind::Control => counts.control += 1,
                PieceKind::Unscored => counts.unscored += 1,
            }
        }
        counts
    }

    pub fn write_canonical<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "#format={FORMAT_NAME}")?;
        writeln!(out, "#version={FORMAT_VERSION}")?;
        for (name, id) in self.specials.entries() {
            if let Some(id) = id {
                writeln!(out, "#{name}={id}")?;
            }
        }
        writeln!(out, "#max_char_repeat={}", self.normalizer.max_char_repeat)?;
        writeln!(out, "#preserve_space={}", self.normalizer.preserve_space)?;
        writeln!(out, "#lowercase={}", self.normalizer.lowercase)?;
        for (id, piece) in self.pieces.iter().enumerate() {
            let score = match piece.score {
                Some(s) => s.to_string(),
                None => NO_SCORE.to_string(),
            };
            writeln!(
                out,
                "{id}\t{}\t{score}\t{}",
                escape_surface(&piece.surface),
                piece.kind
            )?;
        }
        Ok(())
    }

    pub fn to_canonical_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(self.pieces.len() * 24);
        self.write_canonical(&mut buf)
            .expect("writing to a Vec cannot fail");
        buf
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn checksum(&self) -> String {
        hex::encode(Sha256::digest(self.to_canonical_bytes()))
    }

    pub fn parse_canonical(text: &str) -> Result<Self, ModelError> {
        parse_canonical(text)
    }
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct KindCounts {
    pub normal: usize,
    pub unknown: usize,
    pub control: usize,
    pub unscored: usize,
}

fn build_index(pieces: &[VocabPiece]) -> Result<HashMap<String, TokenId>, ModelError> {
    let mut index = HashMap::with_capacity(pieces.len());
    for (id, piece) in pieces.iter().enumerate() {
        let id = id as TokenId;
        piece.validate(id)?;
        if let Some(&first) = index.get(&piece.surface) {
            return Err(ModelError::DuplicateSurface {
                surface: piece.surface.clone(),
                id,
                first,
            });
        }
        index.insert(piece.surface.clone(), id);
    }
    Ok(index)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SaveOptions {
    pub allow_positive_scores: bool,
}

pub fn load_canonical(path: impl AsRef<Path>) -> Result<TokenizerModel, ModelError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| ModelError::io(path, e))?;
    parse_canonical(&text)
}

pub fn save_canonical(
    model: &TokenizerModel,
    path: impl AsRef<Path>,
    opts: SaveOptions,
) -> Result<(), ModelError> {
    if !opts.allow_positive_scores {
        if let Some(&id) = model.positive_score_ids().first() {
            let score = model.pieces[id as usize].score.unwrap_or_default();
            return Err(ModelError::PositiveScore { id, score });
        }
    }
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| ModelError::io(path, e))?;
    let mut out = BufWriter::new(file);
    model
        .write_canonical(&mut out)
        .and_then(|_| out.flush())
        .map_err(|e| ModelError::io(path, e))
}

fn parse_canonical(text: &str) -> Result<TokenizerModel, ModelError> {
    let mut header: HashMap<&str, (usize, &str)> = HashMap::new();
    let mut pieces = Vec::new();
    let mut in_body = false;

    let body = text.strip_suffix('\n').unwrap_or(text);
    if body.is_empty() {
        return Err(ModelError::parse(1, "empty model file"));
    }
    for (n, line) in body.split('\n').enumerate() {
        let lineno = n + 1;
        if let Some(kv) = line.strip_prefix('#') {
            if in_body {
                return Err(ModelError::parse(lineno, "header line after records"));
            }
            let (key, value) = kv
                .split_once('=')
                .ok_or_else(|| ModelError::parse(lineno, "header line without '='"))?;
            if header.insert(key, (lineno, value)).is_some() {
                return Err(ModelError::parse(lineno, format!("repeated header key {key}")));
            }
            continue;
        }
        in_body = true;
        pieces.push(parse_record(line, lineno, pieces.len())?);
    }

    if let Some(&(lineno, format)) = header.get("format") {
        if format != FORMAT_NAME {
            return Err(ModelError::parse(lineno, format!("unexpected format {format:?}")));
        }
    }
    if let Some(&(lineno, version)) = header.get("version") {
        if version != FORMAT_VERSION.to_string() {
            return Err(ModelError::parse(
                lineno,
                format!("unsupported version {version}"),
            ));
        }
    }

    let header_id = |key: &str| -> Result<Option<TokenId>, ModelError> {
        header
            .get(key)
            .map(|&(lineno, v)| {
                v.parse::<TokenId>()
                    .map_err(|_| ModelError::parse(lineno, format!("{key}: invalid id {v:?}")))
            })
            .transpose()
    };
    let header_parse = |key: &str| -> Result<Option<(usize, &str)>, ModelError> {
        Ok(header.get(key).copied())
    };

    let mut normalizer = NormalizerConfig::default();
    if let Some((lineno, v)) = header_parse("max_char_repeat")? {
        normalizer.max_char_repeat = v
            .parse()
            .map_err(|_| ModelError::parse(lineno, format!("max_char_repeat: {v:?}")))?;
    }
    if let Some((lineno, v)) = header_parse("preserve_space")? {
        normalizer.preserve_space = parse_bool(v, lineno)?;
    }
    if let Some((lineno, v)) = header_parse("lowercase")? {
        normalizer.lowercase = parse_bool(v, lineno)?;
    }

    let unk = match header_id("unk_id")? {
        Some(id) => id,
        None => {
            let unknowns: Vec<usize> = pieces
                .iter()
                .enumerate()
                .filter(|(_, p)| p.kind == PieceKind::Unknown)
                .map(|(i, _)| i)
                .collect();
            if unknowns.len() != 1 {
                return Err(ModelError::UnknownCount(unknowns.len()));
            }
            unknowns[0] as TokenId
        }
    };
    let specials = Specials {
        unk,
        mask: header_id("mask_id")?,
        pad: header_id("pad_id")?,
        bos: header_id("bos_id")?,
        eos: header_id("eos_id")?,
        space: header_id("space_id")?,
    };
    TokenizerModel::new(pieces, specials, normalizer)
}

fn parse_bool(v: &str, lineno: usize) -> Result<bool, ModelError> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(ModelError::parse(lineno, format!("expected true/false, got {v:?}"))),
    }
}

fn parse_record(line: &str, lineno: usize, expected_id: usize) -> Result<VocabPiece, ModelError> {
    let mut cols = line.split('\t');
    let (Some(id), Some(surface), Some(score), Some(kind), None) =
        (cols.next(), cols.next(), cols.next(), cols.next(), cols.next())
    else {
        return Err(ModelError::parse(lineno, "expected 4 tab-separated columns"));
    };
    let id: usize = id
        .parse()
        .map_err(|_| ModelError::parse(lineno, format!("invalid id {id:?}")))?;
    if id != expected_id {
        return Err(ModelError::parse(
            lineno,
            format!("id {id} out of sequence, expected {expected_id}"),
        ));
    }
    let surface = unescape_surface(surface).map_err(|m| ModelError::parse(lineno, m))?;
    let score = if score == NO_SCORE {
        None
    } else {
        let s: f32 = score
            .parse()
            .map_err(|_| ModelError::parse(lineno, format!("invalid score {score:?}")))?;
        if !s.is_finite() {
            return Err(ModelError::parse(lineno, format!("non-finite score {score}")));
        }
        Some(s)
    };
    let kind = kind.parse().map_err(|m: String| ModelError::parse(lineno, m))?;
    let piece = VocabPiece {
        surface,
        score,
        kind,
    };
    piece
        .validate(id as TokenId)
        .map_err(|e| ModelError::parse(lineno, e.to_string()))?;
    Ok(piece)
}

pub fn escape_surface(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape_surface(s: &str) -> Result<String, String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => return Err(format!("unknown escape \\{other}")),
            None => return Err("dangling backslash".into()),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const THREE: &str = "0\t<unk>\t0\tunknown\n1\ta\t-1\tnormal\n2\tb\t-2\tnormal\n";

    fn three_piece() -> TokenizerModel {
        parse_canonical(THREE).unwrap()
    }

    #[test]
    fn minimal_model() {
        let m = three_piece();
        assert_eq!(m.len(), 3);
        assert_eq!(m.unk_id(), 0);
        assert_eq!(m.id_of("b"), Some(2));
        assert_eq!(m.specials().mask, None);
    }

    #[test]
    fn duplicate_surface_is_rejected() {
        let err = parse_canonical("0\t<unk>\t0\tunknown\n1\ta\t-1\tnormal\n2\ta\t-2\tnormal\n")
            .unwrap_err();
        assert!(matches!(err, ModelError::DuplicateSurface { id: 2, first: 1, .. }), "{err}");
    }

    #[test]
    fn dangling_special() {
        let err = parse_canonical(&format!("#mask_id=7\n{THREE}")).unwrap_err();
        assert!(matches!(err, ModelError::DanglingSpecial { name: "mask_id", id: 7, .. }));
    }

    #[test]
    fn non_finite_score_reports_line() {
        let err = parse_canonical("0\t<unk>\t0\tunknown\n1\ta\tNaN\tnormal\n").unwrap_err();
        assert!(matches!(err, ModelError::Parse { line: 2, .. }), "{err}");
        let err = parse_canonical("0\t<unk>\t0\tunknown\n1\ta\tinf\tnormal\n").unwrap_err();
        assert!(matches!(err, ModelError::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn positive_score_loads_with_flag() {
        let m = parse_canonical("0\t<unk>\t0\tunknown\n1\ta\t1\tnormal\n").unwrap();
        assert_eq!(m.positive_score_ids(), vec![1]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.tsv");
        let err = save_canonical(&m, &path, SaveOptions::default()).unwrap_err();
        assert!(matches!(err, ModelError::PositiveScore { id: 1, .. }));
        save_canonical(
            &m,
            &path,
            SaveOptions {
                allow_positive_scores: true,
            },
        )
        .unwrap();
        assert_eq!(load_canonical(&path).unwrap(), m);
    }

    #[test]
    fn exactly_one_unknown() {
        let err = parse_canonical("0\ta\t-1\tnormal\n").unwrap_err();
        assert!(matches!(err, ModelError::UnknownCount(0)));
        let err = parse_canonical("0\t<unk>\t0\tunknown\n1\t<unk2>\t0\tunknown\n").unwrap_err();
        assert!(matches!(err, ModelError::UnknownCount(2)));
        let err = parse_canonical(&format!("#unk_id=1\n{THREE}")).unwrap_err();
        assert!(matches!(err, ModelError::UnkMismatch(1)));
    }

    #[test]
    fn unscored_and_escapes_round_trip() {
        let pieces = vec![
            VocabPiece::unknown("<unk>"),
            VocabPiece::normal("tab\there", -0.5),
            VocabPiece::normal("back\\slash\nnl\rcr", -3.25),
            VocabPiece::unscored("😀"),
            VocabPiece::normal("zero", 0.0),
            VocabPiece::control("<_>"),
        ];
        let m = TokenizerModel::with_surfaces(pieces, &SpecialSurfaces::default(), Default::default())
            .unwrap();
        assert_eq!(m.specials().space, Some(5));
        let text = String::from_utf8(m.to_canonical_bytes()).unwrap();
        assert!(text.contains("3\t😀\t∅\tunscored\n"));
        assert!(text.contains("4\tzero\t0\tnormal\n"));
        assert_eq!(parse_canonical(&text).unwrap(), m);
    }

    #[test]
    fn scored_unscored_kind_rules() {
        let err = parse_canonical("0\t<unk>\t0\tunknown\n1\ta\t∅\tnormal\n").unwrap_err();
        assert!(matches!(err, ModelError::Parse { line: 2, .. }));
        let err = parse_canonical("0\t<unk>\t0\tunknown\n1\ta\t-1\tunscored\n").unwrap_err();
        assert!(matches!(err, ModelError::Parse { line: 2, .. }));
    }

    #[test]
    fn out_of_sequence_ids() {
        let err = parse_canonical("0\t<unk>\t0\tunknown\n2\ta\t-1\tnormal\n").unwrap_err();
        assert!(matches!(err, ModelError::Parse { line: 2, .. }));
    }

    #[test]
    fn save_to_unwritable_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("missing-dir").join("m.tsv");
        let err = save_canonical(&three_piece(), &path, SaveOptions::default()).unwrap_err();
        assert!(matches!(err, ModelError::Io { .. }));
    }
}
