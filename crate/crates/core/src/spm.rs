//! Read-only importer for SentencePiece `.model` files.
//!
//! Only the repeated `pieces` field (field 1 of `ModelProto`) is decoded; each
//! entry is a `SentencePiece { piece = 1; score = 2; type = 3 }` message.
//! Everything else (trainer spec, normalizer spec, charsmaps) is skipped by
//! wire type.

use std::fs;
use std::path::Path;

use crate::model::{ModelError, PieceKind, SpecialSurfaces, TokenizerModel, VocabPiece};
use crate::normalizer::NormalizerConfig;

const WIRE_VARINT: u8 = 0;
const WIRE_FIXED64: u8 = 1;
const WIRE_LEN: u8 = 2;
const WIRE_FIXED32: u8 = 5;

// sentencepiece_model.proto, SentencePiece.Type
const TYPE_NORMAL: u64 = 1;
const TYPE_UNKNOWN: u64 = 2;

pub fn import_spm(path: impl AsRef<Path>) -> Result<TokenizerModel, ModelError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| ModelError::io(path, e))?;
    import_spm_bytes(&bytes, &SpecialSurfaces::default(), NormalizerConfig::default())
}

pub fn import_spm_bytes(
    bytes: &[u8],
    surfaces: &SpecialSurfaces,
    normalizer: NormalizerConfig,
) -> Result<TokenizerModel, ModelError> {
    let pieces = decode_pieces(bytes)?;
    if !pieces.iter().any(|p| p.kind == PieceKind::Unknown) {
        return Err(ModelError::UnknownCount(0));
    }
    TokenizerModel::with_surfaces(pieces, surfaces, normalizer)
}

/// Decodes the piece records in file order.
pub fn decode_pieces(bytes: &[u8]) -> Result<Vec<VocabPiece>, ModelError> {
    let mut reader = WireReader::new(bytes, 0);
    let mut pieces = Vec::new();
    while !reader.is_done() {
        let (field, wire) = reader.key()?;
        if field == 1 {
            if wire != WIRE_LEN {
                return Err(reader.error(format!("pieces field has wire type {wire}")));
            }
            let base = reader.offset();
            let body = reader.len_delimited()?;
            pieces.push(decode_piece(body, base)?);
        } else {
            reader.skip(wire)?;
        }
    }
    Ok(pieces)
}

fn decode_piece(bytes: &[u8], base: usize) -> Result<VocabPiece, ModelError> {
    let mut reader = WireReader::new(bytes, base);
    let mut surface = None;
    let mut score = 0.0f32;
    let mut kind = TYPE_NORMAL;
    while !reader.is_done() {
        let (field, wire) = reader.key()?;
        match (field, wire) {
            (1, WIRE_LEN) => {
                let at = reader.offset();
                let raw = reader.len_delimited()?;
                let s = std::str::from_utf8(raw).map_err(|_| ModelError::Wire {
                    offset: at,
                    message: "piece is not valid UTF-8".into(),
                })?;
                surface = Some(s.to_string());
            }
            (2, WIRE_FIXED32) => score = f32::from_le_bytes(reader.fixed::<4>()?),
            (3, WIRE_VARINT) => kind = reader.varint()?,
            (1..=3, other) => {
                return Err(reader.error(format!(
                    "field {field} has unsupported wire type {other}"
                )))
            }
            _ => reader.skip(wire)?,
        }
    }
    let surface = surface.ok_or_else(|| ModelError::Wire {
        offset: base,
        message: "piece record without a surface".into(),
    })?;
    let kind = match kind {
        TYPE_NORMAL => PieceKind::Normal,
        TYPE_UNKNOWN => PieceKind::Unknown,
        _ => PieceKind::Control,
    };
    Ok(VocabPiece {
        surface,
        score: Some(score),
        kind,
    })
}

struct WireReader<'a> {
    buf: &'a [u8],
    pos: usize,
    base: usize,
}

impl<'a> WireReader<'a> {
    fn new(buf: &'a [u8], base: usize) -> Self {
        Self { buf, pos: 0, base }
    }

    fn is_done(&self) -> bool {
        self.pos >= self.buf.len()
    }

    fn offset(&self) -> usize {
        self.base + self.pos
    }

    fn error(&self, message: impl Into<String>) -> ModelError {
        ModelError::Wire {
            offset: self.offset(),
            message: message.into(),
        }
    }

    fn varint(&mut self) -> Result<u64, ModelError> {
        let mut value = 0u64;
        for shift in (0..64).step_by(7) {
            let Some(&b) = self.buf.get(self.pos) else {
                return Err(self.error("truncated varint"));
            };
            self.pos += 1;
            value |= u64::from(b & 0x7f) << shift;
            if b & 0x80 == 0 {
                return Ok(value);
            }
        }
        Err(self.error("varint longer than 10 bytes"))
    }

    fn key(&mut self) -> Result<(u64, u8), ModelError> {
        let key = self.varint()?;
        Ok((key >> 3, (key & 7) as u8))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&end| end <= self.buf.len())
            .ok_or_else(|| self.error(format!("truncated: need {n} bytes")))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn fixed<const N: usize>(&mut self) -> Result<[u8; N], ModelError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn len_delimited(&mut self) -> Result<&'a [u8], ModelError> {
        let len = self.varint()?;
        let len = usize::try_from(len).map_err(|_| self.error("length overflow"))?;
        self.take(len)
    }

    fn skip(&mut self, wire: u8) -> Result<(), ModelError> {
        match wire {
            WIRE_VARINT => self.varint().map(drop),
            WIRE_FIXED64 => self.take(8).map(drop),
            WIRE_LEN => self.len_delimited().map(drop),
            WIRE_FIXED32 => self.take(4).map(drop),
            other => Err(self.error(format!("unsupported wire type {other}"))),
        }
    }
}
