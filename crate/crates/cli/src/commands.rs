use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use vocab_graft_core::corpus::{self, format_oov_table, open_records, split_indices, write_dataset};
use vocab_graft_core::embedding::{self, Matrix};
use vocab_graft_core::emoji::load_emoji_set;
use vocab_graft_core::masking::{masking_stats, parse_prob};
use vocab_graft_core::model::{save_canonical, SaveOptions, SpecialSurfaces};
use vocab_graft_core::schedule::{self, LayerStack, ScheduleConfig};
use vocab_graft_core::spm::import_spm_bytes;
use vocab_graft_core::{
    decode, transfer, ChunkOptions, EmojiSet, InitScheme, MaskedBatch, Masker, MaskingConfig, NormalizerConfig,
    ScalarRange, SplitEmbeddings, Tokenizer, TokenizerModel, TransferPolicy, TransferReport,
};

use crate::cli::*;
use crate::Failure;

type Result<T> = std::result::Result<T, Failure>;

pub const EMOJI_ENV: &str = "VOCAB_GRAFT_EMOJI_DATA";

pub fn run(cli: &Cli) -> Result<()> {
    let ctx = Ctx { seed: cli.seed, quiet: cli.quiet };
    match &cli.command {
        Command::ImportSpm(a) => import_spm(&ctx, a),
        Command::Transfer(a) => run_transfer(&ctx, a),
        Command::Tokenize(a) => tokenize(a),
        Command::Decode(a) => run_decode(a),
        Command::Oov(a) => oov(a),
        Command::Diff(a) => diff(a),
        Command::Chunk(a) => run_chunk(&ctx, a),
        Command::MaskAudit(a) => mask_audit(&ctx, a),
        Command::ScheduleDump(a) | Command::Schedule { action: ScheduleAction::Dump(a) } => schedule_dump(a),
        Command::SplitEmbeddings(a) => split_embeddings(a),
        Command::MergeEmbeddings(a) => merge_embeddings(a),
        Command::InitEmbeddings(a) => init_embeddings(&ctx, a),
        Command::VocabReport(a) => vocab_report(a),
    }
}

struct Ctx {
    seed: u64,
    quiet: bool,
}

impl Ctx {
    fn warn(&self, message: &str) {
        if !self.quiet {
            eprintln!("{}", json!({ "warning": message }));
        }
    }
}

fn finish(command: &str, result: impl Serialize) -> Result<()> {
    let line = json!({ "ok": true, "command": command, "result": result });
    let mut out = io::stdout().lock();
    writeln!(out, "{line}").and_then(|_| out.flush()).context("writing to stdout")?;
    Ok(())
}

/// Canonical text models start with their format header; anything else is
/// read as a SentencePiece protobuf.
fn load_model(path: &Path) -> anyhow::Result<TokenizerModel> {
    let bytes = fs::read(path).with_context(|| format!("reading model {}", path.display()))?;
    let model = if bytes.starts_with(b"#format=") {
        let text = std::str::from_utf8(&bytes).with_context(|| format!("model {} is not UTF-8", path.display()))?;
        TokenizerModel::parse_canonical(text)
    } else {
        import_spm_bytes(&bytes, &SpecialSurfaces::default(), NormalizerConfig::default())
    };
    model.with_context(|| format!("loading model {}", path.display()))
}

fn save_model(model: &TokenizerModel, path: &Path, allow_positive: bool) -> anyhow::Result<()> {
    save_canonical(model, path, SaveOptions { allow_positive_scores: allow_positive })
        .with_context(|| format!("writing model {}", path.display()))
}

fn load_emoji(arg: &EmojiArg) -> anyhow::Result<EmojiSet> {
    let path = arg.emoji.clone().or_else(|| std::env::var_os(EMOJI_ENV).map(PathBuf::from));
    match path {
        Some(p) => load_emoji_set(&p).with_context(|| format!("loading emoji data {}", p.display())),
        None => Ok(EmojiSet::pinned()),
    }
}

fn normalizer(arg: &NormalizerArg, base: NormalizerConfig) -> Result<NormalizerConfig> {
    let Some(spec) = &arg.normalizer else {
        return Ok(base);
    };
    let mut cfg = base;
    for item in spec.split(',').filter(|s| !s.trim().is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--normalizer entry {item:?} is not KEY=VALUE")))?;
        let bad = || Failure::Usage(format!("--normalizer: bad value {v:?} for {k}"));
        match k.trim() {
            "max_char_repeat" => cfg.max_char_repeat = v.trim().parse().map_err(|_| bad())?,
            "lowercase" => cfg.lowercase = v.trim().parse().map_err(|_| bad())?,
            "preserve_space" => cfg.preserve_space = v.trim().parse().map_err(|_| bad())?,
            other => return Err(Failure::Usage(format!("--normalizer: unknown key {other:?}"))),
        }
    }
    cfg.validate().map_err(Failure::Usage)?;
    Ok(cfg)
}

fn create(path: &Path) -> anyhow::Result<BufWriter<fs::File>> {
    let f = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

/// Payload destination: a file when given, otherwise stdout ahead of the
/// result line.
fn sink(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn import_spm(ctx: &Ctx, a: &ImportSpmArgs) -> Result<()> {
    let bytes = fs::read(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let model = import_spm_bytes(&bytes, &SpecialSurfaces::default(), NormalizerConfig::default())
        .with_context(|| format!("importing {}", a.input.display()))?;
    let positive = model.positive_score_ids();
    if !positive.is_empty() {
        ctx.warn(&format!("{} pieces have positive scores (first id {})", positive.len(), positive[0]));
    }
    save_model(&model, &a.out, a.allow_positive_scores)?;
    finish(
        "import-spm",
        json!({
            "pieces": model.len(),
            "kinds": model.kind_counts(),
            "specials": model.specials(),
            "positive_score_ids": positive.len(),
            "checksum": model.checksum(),
            "out": a.out,
        }),
    )
}

fn run_transfer(ctx: &Ctx, a: &TransferArgs) -> Result<()> {
    let recipient = load_model(&a.recipient)?;
    let donor = load_model(&a.donor)?;
    let emoji = if a.no_emoji { EmojiSet::empty() } else { load_emoji(&a.emoji)? };
    let blocks = if a.no_exclude {
        Vec::new()
    } else if a.exclude_block.is_empty() {
        vec![vocab_graft_core::transfer::THAI_BLOCK]
    } else {
        a.exclude_block
            .iter()
            .map(|s| s.parse::<ScalarRange>().map_err(|e| Failure::Usage(format!("--exclude-block: {e}"))))
            .collect::<Result<Vec<_>>>()?
    };
    let policy = TransferPolicy::new(blocks, !a.no_copy_scores, !a.no_emoji).map_err(|e| Failure::Usage(e.to_string()))?;
    let (model, report) = transfer(&recipient, &donor, &policy, &emoji).context("transfer")?;
    for w in &report.warnings {
        ctx.warn(w);
    }
    save_model(&model, &a.out, a.allow_positive_scores)?;
    if let Some(p) = &a.report {
        write_json(p, &report)?;
    }
    #[derive(Serialize)]
    struct Out<'a> {
        #[serde(flatten)]
        report: &'a TransferReport,
        checksum: String,
    }
    finish("transfer", Out { report: &report, checksum: model.checksum() })
}

fn tokenize(a: &TokenizeArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let emoji = load_emoji(&a.emoji)?;
    let cfg = normalizer(&a.normalizer, *model.normalizer())?;
    let tok = Tokenizer::new(&model, &emoji);
    let mut out = sink(a.out.as_deref())?;
    let mut records = 0usize;
    let mut tokens = 0usize;
    let mut unks = 0usize;
    let mut emit = |index: usize, text: &str| -> anyhow::Result<()> {
        let enc = tok.encode(&vocab_graft_core::normalize(text, &cfg));
        records += 1;
        tokens += enc.len();
        unks += enc.unk_count;
        let line = json!({ "index": index, "ids": enc.ids, "pieces": enc.surfaces, "unk_count": enc.unk_count });
        writeln!(out, "{line}")?;
        Ok(())
    };
    match (&a.input, &a.text) {
        (Some(path), _) => {
            for r in open_records(path).context("opening input")? {
                let r = r.context("reading input")?;
                emit(r.index, &r.text)?;
            }
        }
        (None, Some(text)) => emit(0, text)?,
        (None, None) => return Err(Failure::Usage("tokenize needs --input or --text".into())),
    }
    out.flush().context("writing tokens")?;
    drop(out);
    finish("tokenize", json!({ "records": records, "tokens": tokens, "unk_count": unks }))
}

fn run_decode(a: &DecodeArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let text = decode(&model, &a.ids).context("decode")?;
    finish("decode", json!({ "text": text }))
}

struct Pair {
    a: TokenizerModel,
    b: TokenizerModel,
    emoji: EmojiSet,
    cfg: NormalizerConfig,
}

fn load_pair(p: &PairArgs) -> Result<Pair> {
    let a = load_model(&p.model_a)?;
    let b = load_model(&p.model_b)?;
    let emoji = load_emoji(&p.emoji)?;
    let cfg = normalizer(&p.normalizer, *a.normalizer())?;
    Ok(Pair { a, b, emoji, cfg })
}

fn oov(a: &OovArgs) -> Result<()> {
    let pair = load_pair(&a.pair)?;
    let ta = Tokenizer::new(&pair.a, &pair.emoji);
    let tb = Tokenizer::new(&pair.b, &pair.emoji);
    let mut corpora = Vec::new();
    for spec in &a.corpora {
        let (name, path) = spec
            .split_once('=')
            .ok_or_else(|| Failure::Usage(format!("--corpus {spec:?} is not NAME=PATH")))?;
        let records: Box<dyn Iterator<Item = _>> = match open_records(Path::new(path)) {
            Ok(r) => Box::new(r),
            Err(e) => Box::new(std::iter::once(Err(e))),
        };
        corpora.push((name.to_string(), records));
    }
    let (ra, rb) = corpus::oov_report(corpora, &ta, &tb, &pair.cfg);
    if let ReportFormat::Table = a.format {
        print!("{}", format_oov_table(&ra, &rb));
    }
    let failed = !ra.failed.is_empty();
    let result = json!({ "model_a": ra, "model_b": rb });
    if failed {
        return Err(Failure::Data(anyhow!("some corpora failed: {}", serde_json::to_string(&ra.failed).unwrap_or_default())));
    }
    finish("oov", result)
}

fn diff(a: &DiffArgs) -> Result<()> {
    let pair = load_pair(&a.pair)?;
    let ta = Tokenizer::new(&pair.a, &pair.emoji);
    let tb = Tokenizer::new(&pair.b, &pair.emoji);
    let records = open_records(&a.input).context("opening input")?;
    let mut out = sink(a.out.as_deref())?;
    let mut differing = 0usize;
    let compared = corpus::segmentation_diff(records, &ta, &tb, &pair.cfg, |d| {
        differing += 1;
        let line = serde_json::to_string(&d).expect("diff record serializes");
        writeln!(out, "{line}").map_err(|source| corpus::PipelineError::Io { record: d.record_index, source })
    })
    .context("diff")?;
    out.flush().context("writing diff")?;
    drop(out);
    finish("diff", json!({ "compared": compared, "differing": differing }))
}

fn run_chunk(ctx: &Ctx, a: &ChunkArgs) -> Result<()> {
    if a.limit == 0 {
        return Err(Failure::Usage("--limit must be at least 1".into()));
    }
    let model = load_model(&a.model)?;
    let emoji = load_emoji(&a.emoji)?;
    let cfg = normalizer(&a.normalizer, *model.normalizer())?;
    let tok = Tokenizer::new(&model, &emoji);
    let records = open_records(&a.input).context("opening input")?;
    let ds = corpus::chunk(records, &tok, &cfg, ChunkOptions { limit: a.limit, pack: !a.no_pack }).context("chunking")?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let checksum = model.checksum();
    let mut manifests = Vec::new();
    match &a.split {
        None => {
            let all: Vec<usize> = (0..ds.chunks.len()).collect();
            manifests.push(write_dataset(&a.out_dir, &a.name, &ds, &all, !a.no_pack, &checksum).context("writing chunks")?);
        }
        Some(fractions) => {
            let groups = split_indices(ds.chunks.len(), fractions, ctx.seed).map_err(|e| Failure::Usage(e.to_string()))?;
            let names = ["train", "validation", "test"];
            for (i, g) in groups.iter().enumerate() {
                let suffix = names.get(i).map(|s| s.to_string()).unwrap_or_else(|| format!("part{i}"));
                let name = format!("{}.{suffix}", a.name);
                manifests.push(write_dataset(&a.out_dir, &name, &ds, g, !a.no_pack, &checksum).context("writing chunks")?);
            }
        }
    }
    if ds.discarded_count > 0 {
        ctx.warn(&format!("{} records longer than {} tokens were discarded", ds.discarded_count, a.limit));
    }
    let summary: Vec<Value> = manifests
        .iter()
        .map(|m| json!({ "name": m.name, "chunk_count": m.chunk_count, "packed_tokens": m.packed_tokens }))
        .collect();
    finish(
        "chunk",
        json!({
            "records": ds.record_count,
            "chunks": ds.chunks.len(),
            "discarded_count": ds.discarded_count,
            "discarded_tokens": ds.discarded_tokens,
            "packed_tokens": ds.packed_tokens(),
            "outputs": summary,
        }),
    )
}

fn mask_audit(ctx: &Ctx, a: &MaskAuditArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let mask_id = a
        .mask_id
        .or(model.specials().mask)
        .ok_or_else(|| Failure::Usage("model has no <mask> piece; pass --mask-id".into()))?;
    if mask_id as usize >= model.len() {
        return Err(Failure::Usage(format!("--mask-id {mask_id} is outside the vocabulary")));
    }
    let prob = |s: &str| parse_prob(s).map_err(|e| Failure::Usage(e.to_string()));
    let mut cfg = MaskingConfig::for_model(&model, mask_id, ctx.seed);
    cfg.mask_ratio = prob(&a.mask_ratio)?;
    cfg.p_mask = prob(&a.p_mask)?;
    cfg.p_random = prob(&a.p_random)?;
    cfg.p_keep = prob(&a.p_keep)?;
    let masker = Masker::new(cfg).map_err(|e| Failure::Usage(e.to_string()))?;
    let file = fs::File::open(&a.input).with_context(|| format!("opening {}", a.input.display()))?;
    let chunks = corpus::read_chunks(io::BufReader::new(file)).with_context(|| format!("reading {}", a.input.display()))?;
    let mut out = match &a.out {
        Some(p) => Some(create(p)?),
        None => None,
    };
    let mut all: Vec<MaskedBatch> = Vec::new();
    for epoch in 0..a.epochs {
        let batches: Vec<MaskedBatch> = chunks
            .par_iter()
            .enumerate()
            .map(|(i, ids)| masker.mask_sequence(ids, epoch, i as u64))
            .collect::<std::result::Result<_, _>>()
            .context("masking")?;
        if let Some(out) = out.as_mut() {
            for (i, b) in batches.iter().enumerate() {
                let line = json!({ "epoch": epoch, "index": i, "input_ids": b.input_ids, "labels": b.labels });
                writeln!(out, "{line}").context("writing masked sequences")?;
            }
        }
        all.extend(batches);
    }
    if let Some(mut out) = out {
        out.flush().context("writing masked sequences")?;
    }
    let stats = masking_stats(&all).context("masking statistics")?;
    finish("mask-audit", json!({ "sequences": chunks.len(), "epochs": a.epochs, "mask_id": mask_id, "stats": stats }))
}

fn schedule_dump(a: &ScheduleArgs) -> Result<()> {
    let cfg = ScheduleConfig {
        peak_lr: a.peak_lr,
        decay_factor: a.decay_factor,
        warmup_steps: a.warmup_steps,
        max_steps: a.max_steps,
        unfreeze_interval: a.unfreeze_interval,
        resets: a.resets.clone(),
        discriminative_enabled: !a.no_discriminative,
        scheduler_steps_per_update: a.scheduler_steps_per_update,
    };
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    if a.every == 0 {
        return Err(Failure::Usage("--every must be at least 1".into()));
    }
    let rows = schedule::dump(&cfg, &LayerStack::default(), a.until, a.every);
    let mut out = sink(a.out.as_deref())?;
    let written: anyhow::Result<()> = (|| {
        match a.format {
            TableFormat::Csv => {
                writeln!(out, "step,layer,lr,frozen")?;
                for r in &rows {
                    writeln!(out, "{},{},{:e},{}", r.step, r.layer, r.lr, r.frozen)?;
                }
            }
            TableFormat::Json => {
                for r in &rows {
                    writeln!(out, "{}", serde_json::to_string(r)?)?;
                }
            }
        }
        out.flush()?;
        Ok(())
    })();
    written.context("writing schedule")?;
    drop(out);
    finish("schedule-dump", json!({ "rows": rows.len(), "until": a.until, "every": a.every }))
}

fn load_matrix(path: &Path) -> anyhow::Result<Matrix> {
    Matrix::load(path).with_context(|| format!("reading embeddings {}", path.display()))
}

fn save_matrix(m: &Matrix, path: &Path) -> anyhow::Result<()> {
    m.save(path).with_context(|| format!("writing embeddings {}", path.display()))
}

fn split_embeddings(a: &SplitEmbeddingsArgs) -> Result<()> {
    let boundary = match (a.boundary, &a.report) {
        (Some(b), _) => b,
        (None, Some(p)) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let report: TransferReport =
                serde_json::from_str(&text).with_context(|| format!("parsing report {}", p.display()))?;
            report.boundary_id as usize
        }
        (None, None) => return Err(Failure::Usage("split-embeddings needs --boundary or --report".into())),
    };
    let m = load_matrix(&a.input)?;
    let s = embedding::split(&m, boundary).context("split")?;
    save_matrix(s.old_table(), &a.old_out)?;
    save_matrix(s.new_table(), &a.new_out)?;
    finish(
        "split-embeddings",
        json!({ "boundary_id": boundary, "old_rows": s.old_table().rows(), "new_rows": s.new_table().rows(), "width": s.width() }),
    )
}

fn merge_embeddings(a: &MergeEmbeddingsArgs) -> Result<()> {
    let s = SplitEmbeddings::from_tables(load_matrix(&a.old)?, load_matrix(&a.new)?).context("merge")?;
    let m = s.merge();
    save_matrix(&m, &a.out)?;
    finish("merge-embeddings", json!({ "rows": m.rows(), "width": m.cols(), "boundary_id": s.boundary_id() }))
}

fn init_embeddings(ctx: &Ctx, a: &InitEmbeddingsArgs) -> Result<()> {
    let old = load_matrix(&a.old)?;
    let rows = match (a.rows, &a.model) {
        (Some(r), _) => r,
        (None, Some(p)) => {
            let model = load_model(p)?;
            model.len().checked_sub(old.rows()).ok_or_else(|| {
                Failure::Data(anyhow!("model has {} pieces but the table already has {} rows", model.len(), old.rows()))
            })?
        }
        (None, None) => return Err(Failure::Usage("init-embeddings needs --rows or --model".into())),
    };
    let width = old.cols();
    let mut s = SplitEmbeddings::from_tables(old, Matrix::zeros(rows, width)).context("init")?;
    let scheme = match a.scheme {
        InitSchemeArg::Normal => InitScheme::NormalFromOldStats,
        InitSchemeArg::Zero => InitScheme::Zero,
    };
    s.init_new_rows(ctx.seed, scheme);
    save_matrix(s.new_table(), &a.out)?;
    finish("init-embeddings", json!({ "rows": rows, "width": width, "scheme": scheme, "seed": ctx.seed }))
}

fn vocab_report(a: &VocabReportArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let mut result = json!({
        "pieces": model.len(),
        "kinds": model.kind_counts(),
        "specials": model.specials(),
        "normalizer": model.normalizer(),
        "positive_score_ids": model.positive_score_ids().len(),
        "checksum": model.checksum(),
    });
    if let Some(b) = a.boundary {
        if b > model.len() {
            return Err(Failure::Usage(format!("--boundary {b} exceeds the vocabulary size {}", model.len())));
        }
        let mut kinds = std::collections::BTreeMap::<String, usize>::new();
        for p in &model.pieces()[b..] {
            *kinds.entry(p.kind.to_string()).or_default() += 1;
        }
        result["added"] = json!({ "boundary_id": b, "count": model.len() - b, "kinds": kinds });
    }
    finish("vocab-report", result)
}
