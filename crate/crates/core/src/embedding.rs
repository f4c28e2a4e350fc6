//! Two-table embedding lookup over a vocabulary split at the boundary id.
//!
//! Rows below the boundary live in the table of existing vocabulary, rows at
//! or above it in the table of added vocabulary. Gathers through the pair
//! return exactly the rows a single table would.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::TokenId;

pub const EMBEDDING_MAGIC: &[u8; 8] = b"VGEMBED\0";
pub const EMBEDDING_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("boundary {boundary} outside 1..={rows}")]
    BoundaryOutOfRange { boundary: usize, rows: usize },
    #[error("token id {id} outside vocabulary of {rows}")]
    IdOutOfRange { id: TokenId, rows: usize },
    #[error("tables have different widths ({old} vs {new})")]
    WidthMismatch { old: usize, new: usize },
    #[error("buffer of {len} values does not match {rows}x{cols}")]
    Shape { rows: usize, cols: usize, len: usize },
    #[error("embedding file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Row-major `f32` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self, EmbeddingError> {
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(EmbeddingError::Shape {
                rows,
                cols,
                len: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Bitwise equality, so `-0.0 != 0.0` and NaN payloads are compared.
    pub fn bit_eq(&self, other: &Matrix) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> io::Result<()> {
        out.write_all(EMBEDDING_MAGIC)?;
        out.write_all(&EMBEDDING_VERSION.to_le_bytes())?;
        out.write_all(&(self.rows as u64).to_le_bytes())?;
        out.write_all(&(self.cols as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.data.len() * 4);
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self, EmbeddingError> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != EMBEDDING_MAGIC {
            return Err(EmbeddingError::Format("bad magic".into()));
        }
        let mut word = [0u8; 4];
        input.read_exact(&mut word)?;
        let version = u32::from_le_bytes(word);
        if version != EMBEDDING_VERSION {
            return Err(EmbeddingError::Format(format!("unsupported version {version}")));
        }
        let mut dword = [0u8; 8];
        input.read_exact(&mut dword)?;
        let rows = u64::from_le_bytes(dword) as usize;
        input.read_exact(&mut dword)?;
        let cols = u64::from_le_bytes(dword) as usize;
        let len = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| EmbeddingError::Format("dimensions overflow".into()))?;
        let mut raw = Vec::new();
        input.take(len as u64).read_to_end(&mut raw)?;
        if raw.len() != len {
            return Err(EmbeddingError::Format(format!(
                "expected {len} bytes of values, found {}",
                raw.len()
            )));
        }
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        Matrix::new(rows, cols, data)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EmbeddingError> {
        Self::read_from(io::BufReader::new(fs::File::open(path)?))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), EmbeddingError> {
        let mut out = io::BufWriter::new(fs::File::create(path)?);
        self.write_to(&mut out)?;
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitEmbeddings {
    old_table: Matrix,
    new_table: Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitScheme {
    /// Per-dimension mean and standard deviation of the existing rows.
    NormalFromOldStats,
    Zero,
}

pub fn split(single: &Matrix, boundary_id: usize) -> Result<SplitEmbeddings, EmbeddingError> {
    if boundary_id == 0 || boundary_id > single.rows {
        return Err(EmbeddingError::BoundaryOutOfRange {
            boundary: boundary_id,
            rows: single.rows,
        });
    }
    let cut = boundary_id * single.cols;
    Ok(SplitEmbeddings {
        old_table: Matrix {
            rows: boundary_id,
            cols: single.cols,
            data: single.data[..cut].to_vec(),
        },
        new_table: Matrix {
            rows: single.rows - boundary_id,
            cols: single.cols,
            data: single.data[cut..].to_vec(),
        },
    })
}

impl SplitEmbeddings {
    pub fn from_tables(old_table: Matrix, new_table: Matrix) -> Result<Self, EmbeddingError> {
        if old_table.rows == 0 {
            return Err(EmbeddingError::BoundaryOutOfRange {
                boundary: 0,
                rows: new_table.rows,
            });
        }
        if old_table.cols != new_table.cols {
            return Err(EmbeddingError::WidthMismatch {
                old: old_table.cols,
                new: new_table.cols,
            });
        }
        Ok(Self {
            old_table,
            new_table,
        })
    }

    pub fn boundary_id(&self) -> usize {
        self.old_table.rows
    }

    pub fn width(&self) -> usize {
        self.old_table.cols
    }

    pub fn vocab_size(&self) -> usize {
        self.old_table.rows + self.new_table.rows
    }

    pub fn old_table(&self) -> &Matrix {
        &self.old_table
    }

    pub fn new_table(&self) -> &Matrix {
        &self.new_table
    }

    pub fn row(&self, id: TokenId) -> Result<&[f32], EmbeddingError> {
        let id_us = id as usize;
        if id_us < self.old_table.rows {
            Ok(self.old_table.row(id_us))
        } else if id_us < self.vocab_size() {
            Ok(self.new_table.row(id_us - self.old_table.rows))
        } else {
            Err(EmbeddingError::IdOutOfRange {
                id,
                rows: self.vocab_size(),
            })
        }
    }

    pub fn lookup(&self, ids: &[TokenId]) -> Result<Matrix, EmbeddingError> {
        let d = self.width();
        let mut data = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            data.extend_from_slice(self.row(id)?);
        }
        Ok(Matrix {
            rows: ids.len(),
            cols: d,
            data,
        })
    }

    pub fn merge(&self) -> Matrix {
        let mut data = Vec::with_capacity(self.vocab_size() * self.width());
        data.extend_from_slice(&self.old_table.data);
        data.extend_from_slice(&self.new_table.data);
        Matrix {
            rows: self.vocab_size(),
            cols: self.width(),
            data,
        }
    }

    /// Fills the added-vocabulary rows; the existing rows are not touched.
    pub fn init_new_rows(&mut self, seed: u64, scheme: InitScheme) {
        let d = self.width();
        match scheme {
            InitScheme::Zero => self.new_table.data.fill(0.0),
            InitScheme::NormalFromOldStats => {
                let (mean, std) = column_stats(&self.old_table);
                let dists: Vec<Normal<f64>> = mean
                    .iter()
                    .zip(&std)
                    .map(|(&m, &s)| Normal::new(m, s).expect("std is finite and non-negative"))
                    .collect();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for row in self.new_table.data.chunks_exact_mut(d) {
                    for (v, dist) in row.iter_mut().zip(&dists) {
                        *v = dist.sample(&mut rng) as f32;
                    }
                }
            }
        }
    }
}

pub fn merge(split: &SplitEmbeddings) -> Matrix {
    split.merge()
}

pub fn lookup(split: &SplitEmbeddings, ids: &[TokenId]) -> Result<Matrix, EmbeddingError> {
    split.lookup(ids)
}

/// Per-column mean and population standard deviation, in f64.
fn column_stats(m: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let n = m.rows as f64;
    let mut mean = vec![0.0f64; m.cols];
    for row in m.data.chunks_exact(m.cols) {
        for (acc, &v) in mean.iter_mut().zip(row) {
            *acc += f64::from(v);
        }
    }
    mean.iter_mut().for_each(|x| *x /= n);
    let mut var = vec![0.0f64; m.cols];
    for row in m.data.chunks_exact(m.cols) {
        for ((acc, &v), mu) in var.iter_mut().zip(row).zip(&mean) {
            let dev = f64::from(v) - mu;
            *acc += dev * dev;
        }
    }
    let std = var.into_iter().map(|v| (v / n).sqrt()).collect();
    (mean, std)
}
