//! Streaming corpus processing: record reading, chunk packing, unknown-token
//! counting and segmentation diffs between two models.
//!
//! Records are encoded in parallel batches; everything order-dependent
//! (packing, report merging, diff emission) is a sequential fold over the
//! batch results in input order, so outputs do not depend on thread count.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::TokenId;
use crate::normalizer::{normalize, NormalizerConfig};
use crate::tokenizer::{Token, Tokenizer};

pub const DEFAULT_CHUNK_LIMIT: usize = 416;
pub const CHUNKS_MAGIC: &[u8; 8] = b"VGCHUNK\0";
pub const CHUNKS_VERSION: u32 = 1;
const BATCH: usize = 2048;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("record {record}: {source}")]
    Io {
        record: usize,
        #[source]
        source: io::Error,
    },
    #[error("record {record}: {message}")]
    Record { record: usize, message: String },
    #[error("chunk limit must be at least 1")]
    ZeroLimit,
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("chunk file: {0}")]
    Format(String),
    #[error("split fractions {0:?} must be non-negative and sum to 1")]
    Split(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    /// Zero-based line number in the source.
    pub index: usize,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum InputFormat {
    Lines,
    JsonLines,
}

/// Reads UTF-8 lines or JSON lines with a `text` field; the format is chosen
/// by the first byte of the stream. Blank lines and empty texts are skipped
/// but still advance the record index.
pub struct RecordReader<R> {
    input: R,
    format: Option<InputFormat>,
    line: usize,
    buf: Vec<u8>,
    failed: bool,
}

impl<R: BufRead> RecordReader<R> {
    pub fn new(input: R) -> Self {
        Self {
            input,
            format: None,
            line: 0,
            buf: Vec::new(),
            failed: false,
        }
    }

    fn detect(&mut self) -> io::Result<InputFormat> {
        if let Some(f) = self.format {
            return Ok(f);
        }
        let head = self.input.fill_buf()?;
        let f = if head.first() == Some(&b'{') {
            InputFormat::JsonLines
        } else {
            InputFormat::Lines
        };
        self.format = Some(f);
        Ok(f)
    }

    fn next_record(&mut self) -> Result<Option<Record>, PipelineError> {
        loop {
            let index = self.line;
            let format = self
                .detect()
                .map_err(|source| PipelineError::Io { record: index, source })?;
            self.buf.clear();
            let n = self
                .input
                .read_until(b'\n', &mut self.buf)
                .map_err(|source| PipelineError::Io { record: index, source })?;
            if n == 0 {
                return Ok(None);
            }
            self.line += 1;
            let mut raw: &[u8] = &self.buf;
            if let Some(stripped) = raw.strip_suffix(b"\n") {
                raw = stripped;
            }
            if let Some(stripped) = raw.strip_suffix(b"\r") {
                raw = stripped;
            }
            let line = std::str::from_utf8(raw).map_err(|e| PipelineError::Record {
                record: index,
                message: format!("invalid UTF-8: {e}"),
            })?;
            let text = match format {
                InputFormat::Lines => line.to_string(),
                InputFormat::JsonLines => {
                    if line.trim().is_empty() {
                        continue;
                    }
                    let v: serde_json::Value =
                        serde_json::from_str(line).map_err(|e| PipelineError::Record {
                            record: index,
                            message: format!("invalid JSON: {e}"),
                        })?;
                    match v.get("text").and_then(|t| t.as_str()) {
                        Some(t) => t.to_string(),
                        None => {
                            return Err(PipelineError::Record {
                                record: index,
                                message: "missing string field \"text\"".into(),
                            })
                        }
                    }
                }
            };
            if text.is_empty() {
                continue;
            }
            return Ok(Some(Record { index, text }));
        }
    }
}

impl<R: BufRead> Iterator for RecordReader<R> {
    type Item = Result<Record, PipelineError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        match self.next_record() {
            Ok(Some(r)) => Some(Ok(r)),
            Ok(None) => None,
            Err(e) => {
                self.failed = true;
                Some(Err(e))
            }
        }
    }
}

pub fn open_records(path: &Path) -> Result<RecordReader<io::BufReader<fs::File>>, PipelineError> {
    let file = fs::File::open(path).map_err(|source| PipelineError::File {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(RecordReader::new(io::BufReader::new(file)))
}

/// Pulls records in batches, maps each batch in parallel, and hands results
/// to `sink` in input order.
fn for_each_batch<T, I, M, S>(records: I, map: M, mut sink: S) -> Result<(), PipelineError>
where
    I: IntoIterator<Item = Result<Record, PipelineError>>,
    M: Fn(&Record) -> T + Sync,
    T: Send,
    S: FnMut(&Record, T) -> Result<(), PipelineError>,
{
    let mut iter = records.into_iter();
    let mut batch = Vec::with_capacity(BATCH);
    loop {
        batch.clear();
        let mut pending_err = None;
        for r in iter.by_ref() {
            match r {
                Ok(r) => batch.push(r),
                Err(e) => {
                    pending_err = Some(e);
                    break;
                }
            }
            if batch.len() == BATCH {
                break;
            }
        }
        let results: Vec<T> = batch.par_iter().map(&map).collect();
        for (r, t) in batch.iter().zip(results) {
            sink(r, t)?;
        }
        if let Some(e) = pending_err {
            return Err(e);
        }
        if batch.len() < BATCH {
            return Ok(());
        }
    }
}

fn encode_ids(tok: &Tokenizer<'_>, cfg: &NormalizerConfig, text: &str) -> (Vec<TokenId>, usize) {
    let mut tokens: Vec<Token> = Vec::new();
    tok.encode_tokens(&normalize(text, cfg), &mut tokens);
    let unk = tok.model().unk_id();
    let unks = tokens.iter().filter(|t| t.id == unk).count();
    (tokens.into_iter().map(|t| t.id).collect(), unks)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnkCount {
    pub unk_count: u64,
    pub total_tokens: u64,
}

impl UnkCount {
    pub fn percentage(&self) -> f64 {
        if self.total_tokens == 0 {
            0.0
        } else {
            100.0 * self.unk_count as f64 / self.total_tokens as f64
        }
    }

    pub fn merge(self, other: UnkCount) -> UnkCount {
        UnkCount {
            unk_count: self.unk_count + other.unk_count,
            total_tokens: self.total_tokens + other.total_tokens,
        }
    }
}

/// Unknown-token and total-token counts over a record stream, using the
/// model's own normalizer config.
pub fn count_unk<I>(tok: &Tokenizer<'_>, records: I) -> Result<UnkCount, PipelineError>
where
    I: IntoIterator<Item = Result<Record, PipelineError>>,
{
    let cfg = *tok.model().normalizer();
    let mut total = UnkCount::default();
    for_each_batch(
        records,
        |r| {
            let (ids, unks) = encode_ids(tok, &cfg, &r.text);
            UnkCount {
                unk_count: unks as u64,
                total_tokens: ids.len() as u64,
            }
        },
        |_, c| {
            total = total.merge(c);
            Ok(())
        },
    )?;
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ChunkedDataset {
    pub chunks: Vec<Vec<TokenId>>,
    pub chunk_limit: usize,
    pub discarded_count: usize,
    pub discarded_tokens: u64,
    pub record_count: usize,
    /// Record indices packed into each chunk.
    pub source_spans: Vec<Vec<usize>>,
}

impl ChunkedDataset {
    pub fn packed_tokens(&self) -> u64 {
        self.chunks.iter().map(|c| c.len() as u64).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkOptions {
    pub limit: usize,
    /// Pack several records per chunk; otherwise one record per chunk.
    pub pack: bool,
}

impl Default for ChunkOptions {
    fn default() -> Self {
        Self {
            limit: DEFAULT_CHUNK_LIMIT,
            pack: true,
        }
    }
}

/// Greedy packer over already-encoded records.
#[derive(Debug)]
pub struct ChunkPacker {
    opts: ChunkOptions,
    out: ChunkedDataset,
    current: Vec<TokenId>,
    current_spans: Vec<usize>,
}

impl ChunkPacker {
    pub fn new(opts: ChunkOptions) -> Result<Self, PipelineError> {
        if opts.limit == 0 {
            return Err(PipelineError::ZeroLimit);
        }
        Ok(Self {
            opts,
            out: ChunkedDataset {
                chunk_limit: opts.limit,
                ..Default::default()
            },
            current: Vec::new(),
            current_spans: Vec::new(),
        })
    }

    fn flush(&mut self) {
        if !self.current_spans.is_empty() {
            self.out.chunks.push(std::mem::take(&mut self.current));
            self.out
                .source_spans
                .push(std::mem::take(&mut self.current_spans));
        }
    }

    pub fn push(&mut self, record_index: usize, ids: &[TokenId]) {
        self.out.record_count += 1;
        if ids.len() > self.opts.limit {
            self.out.discarded_count += 1;
            self.out.discarded_tokens += ids.len() as u64;
            return;
        }
        if !self.opts.pack || self.current.len() + ids.len() > self.opts.limit {
            self.flush();
        }
        self.current.extend_from_slice(ids);
        self.current_spans.push(record_index);
    }

    pub fn finish(mut self) -> ChunkedDataset {
        self.flush();
        self.out
    }
}

pub fn chunk<I>(
    records: I,
    tok: &Tokenizer<'_>,
    cfg: &NormalizerConfig,
    opts: ChunkOptions,
) -> Result<ChunkedDataset, PipelineError>
where
    I: IntoIterator<Item = Result<Record, PipelineError>>,
{
    let mut packer = ChunkPacker::new(opts)?;
    for_each_batch(
        records,
        |r| encode_ids(tok, cfg, &r.text).0,
        |r, ids| {
            packer.push(r.index, &ids);
            Ok(())
        },
    )?;
    Ok(packer.finish())
}

pub fn write_chunks<W: Write>(ds: &ChunkedDataset, chunk_ids: &[usize], mut out: W) -> io::Result<()> {
    out.write_all(CHUNKS_MAGIC)?;
    out.write_all(&CHUNKS_VERSION.to_le_bytes())?;
    out.write_all(&(chunk_ids.len() as u32).to_le_bytes())?;
    for &i in chunk_ids {
        let c = &ds.chunks[i];
        out.write_all(&(c.len() as u32).to_le_bytes())?;
        for id in c {
            out.write_all(&id.to_le_bytes())?;
        }
    }
    out.flush()
}

pub fn read_chunks<R: Read>(mut input: R) -> Result<Vec<Vec<TokenId>>, PipelineError> {
    let fmt = |m: &str| PipelineError::Format(m.to_string());
    let mut all = Vec::new();
    input
        .read_to_end(&mut all)
        .map_err(|e| PipelineError::Format(e.to_string()))?;
    let mut pos = 0;
    let mut take = |n: usize| -> Result<&[u8], PipelineError> {
        let s = all.get(pos..pos + n).ok_or_else(|| fmt("truncated"))?;
        pos += n;
        Ok(s)
    };
    if take(8)? != CHUNKS_MAGIC {
        return Err(fmt("bad magic"));
    }
    let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().expect("4 bytes"));
    let version = u32_at(take(4)?);
    if version != CHUNKS_VERSION {
        return Err(PipelineError::Format(format!("unsupported version {version}")));
    }
    let count = u32_at(take(4)?) as usize;
    let mut chunks = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let len = u32_at(take(4)?) as usize;
        let raw = take(len.checked_mul(4).ok_or_else(|| fmt("length overflow"))?)?;
        chunks.push(raw.chunks_exact(4).map(u32_at).collect());
    }
    if take(1).is_ok() {
        return Err(fmt("trailing bytes"));
    }
    Ok(chunks)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ChunkManifest {
    pub name: String,
    pub format_version: u32,
    pub chunk_count: usize,
    pub chunk_limit: usize,
    pub packed: bool,
    pub record_count: usize,
    pub discarded_count: usize,
    pub discarded_tokens: u64,
    pub packed_tokens: u64,
    pub model_checksum: String,
    pub source_spans: Vec<Vec<usize>>,
}

/// Writes `<dir>/<name>.chunks` and `<dir>/<name>.manifest.json` for the
/// given subset of chunks.
pub fn write_dataset(
    dir: &Path,
    name: &str,
    ds: &ChunkedDataset,
    chunk_ids: &[usize],
    packed: bool,
    model_checksum: &str,
) -> Result<ChunkManifest, PipelineError> {
    let file_err = |path: PathBuf| move |source| PipelineError::File { path, source };
    let chunks_path = dir.join(format!("{name}.chunks"));
    let f = fs::File::create(&chunks_path).map_err(file_err(chunks_path.clone()))?;
    write_chunks(ds, chunk_ids, BufWriter::new(f)).map_err(file_err(chunks_path.clone()))?;

    let selected_records: usize = chunk_ids.iter().map(|&i| ds.source_spans[i].len()).sum();
    let is_whole = chunk_ids.len() == ds.chunks.len();
    let manifest = ChunkManifest {
        name: name.to_string(),
        format_version: CHUNKS_VERSION,
        chunk_count: chunk_ids.len(),
        chunk_limit: ds.chunk_limit,
        packed,
        record_count: if is_whole { ds.record_count } else { selected_records },
        discarded_count: if is_whole { ds.discarded_count } else { 0 },
        discarded_tokens: if is_whole { ds.discarded_tokens } else { 0 },
        packed_tokens: chunk_ids.iter().map(|&i| ds.chunks[i].len() as u64).sum(),
        model_checksum: model_checksum.to_string(),
        source_spans: chunk_ids.iter().map(|&i| ds.source_spans[i].clone()).collect(),
    };
    let manifest_path = dir.join(format!("{name}.manifest.json"));
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    fs::write(&manifest_path, json).map_err(file_err(manifest_path))?;
    Ok(manifest)
}

/// Seeded shuffle of chunk indices into consecutive groups sized by
/// `fractions` (rounded; the first group absorbs the remainder).
pub fn split_indices(n: usize, fractions: &[f64], seed: u64) -> Result<Vec<Vec<usize>>, PipelineError> {
    let sum: f64 = fractions.iter().sum();
    if fractions.is_empty() || fractions.iter().any(|f| !(*f >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(PipelineError::Split(fractions.to_vec()));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut sizes: Vec<usize> = fractions.iter().map(|f| (f * n as f64).round() as usize).collect();
    let tail: usize = sizes[1..].iter().sum();
    sizes[0] = n.saturating_sub(tail);
    let mut out = Vec::with_capacity(sizes.len());
    let mut start = 0;
    for s in sizes {
        let end = (start + s).min(n);
        let mut group = idx[start..end].to_vec();
        group.sort_unstable();
        out.push(group);
        start = end;
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OovEntry {
    pub unk_count: u64,
    pub total_tokens: u64,
    pub percentage: f64,
}

impl From<UnkCount> for OovEntry {
    fn from(c: UnkCount) -> Self {
        Self {
            unk_count: c.unk_count,
            total_tokens: c.total_tokens,
            percentage: c.percentage(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OovReport {
    pub per_dataset: BTreeMap<String, OovEntry>,
    /// Datasets whose stream failed, with the error.
    pub failed: BTreeMap<String, String>,
}

pub fn format_percentage(p: f64) -> String {
    if p < 0.005 {
        "~0%".to_string()
    } else {
        format!("{p:.2}%")
    }
}

/// Human-readable side-by-side table of two reports.
pub fn format_oov_table(a: &OovReport, b: &OovReport) -> String {
    let mut out = String::from("dataset\tunk_a\tpct_a\tunk_b\tpct_b\n");
    for (name, ea) in &a.per_dataset {
        let eb = b.per_dataset.get(name).cloned().unwrap_or_default();
        out.push_str(&format!(
            "{name}\t{}\t{}\t{}\t{}\n",
            ea.unk_count,
            format_percentage(ea.percentage),
            eb.unk_count,
            format_percentage(eb.percentage)
        ));
    }
    for (name, err) in &a.failed {
        out.push_str(&format!("{name}\tfailed: {err}\n"));
    }
    out
}

/// OOV counts for two models over the same normalized input.
pub fn oov_report<I, C>(
    corpora: C,
    tok_a: &Tokenizer<'_>,
    tok_b: &Tokenizer<'_>,
    cfg: &NormalizerConfig,
) -> (OovReport, OovReport)
where
    C: IntoIterator<Item = (String, I)>,
    I: IntoIterator<Item = Result<Record, PipelineError>>,
{
    let mut ra = OovReport::default();
    let mut rb = OovReport::default();
    for (name, records) in corpora {
        let mut ca = UnkCount::default();
        let mut cb = UnkCount::default();
        let result = for_each_batch(
            records,
            |r| {
                let norm = normalize(&r.text, cfg);
                let count = |tok: &Tokenizer<'_>| {
                    let mut tokens = Vec::new();
                    tok.encode_tokens(&norm, &mut tokens);
                    let unk = tok.model().unk_id();
                    UnkCount {
                        unk_count: tokens.iter().filter(|t| t.id == unk).count() as u64,
                        total_tokens: tokens.len() as u64,
                    }
                };
                (count(tok_a), count(tok_b))
            },
            |_, (a, b)| {
                ca = ca.merge(a);
                cb = cb.merge(b);
                Ok(())
            },
        );
        match result {
            Ok(()) => {
                ra.per_dataset.insert(name.clone(), ca.into());
                rb.per_dataset.insert(name, cb.into());
            }
            Err(e) => {
                ra.failed.insert(name.clone(), e.to_string());
                rb.failed.insert(name, e.to_string());
            }
        }
    }
    (ra, rb)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffRecord {
    pub record_index: usize,
    pub tokens_a: Vec<String>,
    pub tokens_b: Vec<String>,
}

/// Calls `emit` for every record whose two segmentations differ, in input
/// order. Returns the number of records compared.
pub fn segmentation_diff<I, E>(
    records: I,
    tok_a: &Tokenizer<'_>,
    tok_b: &Tokenizer<'_>,
    cfg: &NormalizerConfig,
    mut emit: E,
) -> Result<usize, PipelineError>
where
    I: IntoIterator<Item = Result<Record, PipelineError>>,
    E: FnMut(DiffRecord) -> Result<(), PipelineError>,
{
    let mut compared = 0;
    for_each_batch(
        records,
        |r| {
            let norm = normalize(&r.text, cfg);
            let a = tok_a.encode(&norm).surfaces;
            let b = tok_b.encode(&norm).surfaces;
            (a != b).then_some((a, b))
        },
        |r, diff| {
            compared += 1;
            match diff {
                Some((tokens_a, tokens_b)) => emit(DiffRecord {
                    record_index: r.index,
                    tokens_a,
                    tokens_b,
                }),
                None => Ok(()),
            }
        },
    )?;
    Ok(compared)
}
