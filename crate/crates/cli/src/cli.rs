use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "vocab-graft",
    version,
    about = "Graft donor vocabulary into a unigram tokenizer and prepare data for continued pretraining",
    after_help = "Every successful run ends with one JSON result line on stdout. Errors are one JSON line on stderr; \
                  exit code 1 means a usage error and 2 a data error."
)]
pub struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for corpus operations (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Suppress warnings on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a SentencePiece .model file into the canonical text format.
    ImportSpm(ImportSpmArgs),
    /// Append donor pieces and emoji sequences to a recipient model.
    Transfer(TransferArgs),
    /// Segment text into pieces, one JSON line per record.
    Tokenize(TokenizeArgs),
    /// Turn token ids back into text.
    Decode(DecodeArgs),
    /// Unknown-token counts of two models over named corpora.
    Oov(OovArgs),
    /// Records whose segmentation differs between two models.
    Diff(DiffArgs),
    /// Encode a corpus and pack it into length-limited chunks.
    Chunk(ChunkArgs),
    /// Apply masking to a chunk file and report branch statistics.
    MaskAudit(MaskAuditArgs),
    /// Learning rate and frozen state per layer over a step range.
    ScheduleDump(ScheduleArgs),
    /// Same as schedule-dump.
    Schedule {
        #[command(subcommand)]
        action: ScheduleAction,
    },
    /// Split one embedding matrix at the boundary id.
    SplitEmbeddings(SplitEmbeddingsArgs),
    /// Concatenate the existing and added embedding tables.
    MergeEmbeddings(MergeEmbeddingsArgs),
    /// Create rows for the added vocabulary.
    InitEmbeddings(InitEmbeddingsArgs),
    /// Sizes, piece kinds, specials and checksum of a model.
    VocabReport(VocabReportArgs),
}

#[derive(Debug, Subcommand)]
pub enum ScheduleAction {
    Dump(ScheduleArgs),
}

#[derive(Debug, Args)]
pub struct ImportSpmArgs {
    /// SentencePiece model file.
    #[arg(long)]
    pub input: PathBuf,
    /// Destination of the canonical model.
    #[arg(long)]
    pub out: PathBuf,
    /// Write pieces with positive scores instead of refusing.
    #[arg(long)]
    pub allow_positive_scores: bool,
}

#[derive(Debug, Args)]
pub struct EmojiArg {
    /// Emoji data file (emoji-sequences / emoji-zwj-sequences / emoji-test format).
    /// Defaults to $VOCAB_GRAFT_EMOJI_DATA, then to the bundled Unicode 15.1 list.
    #[arg(long)]
    pub emoji: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TransferArgs {
    /// Model receiving the pieces (canonical or SentencePiece).
    #[arg(long)]
    pub recipient: PathBuf,
    /// Model supplying the pieces (canonical or SentencePiece).
    #[arg(long)]
    pub donor: PathBuf,
    #[command(flatten)]
    pub emoji: EmojiArg,
    /// Skip donor pieces with any scalar in this range, e.g. 0E00..0E7F.
    /// Repeatable; defaults to the Thai block.
    #[arg(long = "exclude-block", value_name = "LO..HI")]
    pub exclude_block: Vec<String>,
    /// Do not exclude any script block.
    #[arg(long, conflicts_with = "exclude_block")]
    pub no_exclude: bool,
    /// Give new pieces the recipient's lowest score instead of the donor score.
    #[arg(long)]
    pub no_copy_scores: bool,
    /// Do not append emoji sequences.
    #[arg(long)]
    pub no_emoji: bool,
    /// Destination of the merged model.
    #[arg(long)]
    pub out: PathBuf,
    /// Destination of the JSON transfer report.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub allow_positive_scores: bool,
}

#[derive(Debug, Args)]
pub struct NormalizerArg {
    /// Override normalization, e.g. max_char_repeat=3,lowercase=true,preserve_space=true.
    /// Defaults to the (first) model's own settings.
    #[arg(long, value_name = "KEY=VALUE,...")]
    pub normalizer: Option<String>,
}

#[derive(Debug, Args)]
pub struct TokenizeArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Lines or JSON lines with a "text" field.
    #[arg(long, conflicts_with = "text")]
    pub input: Option<PathBuf>,
    /// A single text to encode.
    #[arg(long)]
    pub text: Option<String>,
    /// Write the per-record lines here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub emoji: EmojiArg,
    #[command(flatten)]
    pub normalizer: NormalizerArg,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Comma-separated ids.
    #[arg(long, value_delimiter = ',', required = true)]
    pub ids: Vec<u32>,
}

#[derive(Debug, Args)]
pub struct PairArgs {
    /// Baseline model.
    #[arg(long = "model-a", visible_alias = "model")]
    pub model_a: PathBuf,
    /// Model to compare against the baseline.
    #[arg(long = "model-b")]
    pub model_b: PathBuf,
    #[command(flatten)]
    pub emoji: EmojiArg,
    #[command(flatten)]
    pub normalizer: NormalizerArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReportFormat {
    Json,
    Table,
}

#[derive(Debug, Args)]
pub struct OovArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    /// Named corpus, NAME=PATH. Repeatable.
    #[arg(long = "corpus", value_name = "NAME=PATH", required = true)]
    pub corpora: Vec<String>,
    /// Also print a human-readable table before the result line.
    #[arg(long, value_enum, default_value = "json")]
    pub format: ReportFormat,
}

#[derive(Debug, Args)]
pub struct DiffArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    #[arg(long)]
    pub input: PathBuf,
    /// Write the differing records here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ChunkArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    /// Directory for <name>.chunks and <name>.manifest.json.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value = "corpus")]
    pub name: String,
    /// Maximum tokens per chunk; longer records are discarded.
    #[arg(long, default_value_t = vocab_graft_core::corpus::DEFAULT_CHUNK_LIMIT)]
    pub limit: usize,
    /// One record per chunk.
    #[arg(long)]
    pub no_pack: bool,
    /// Seeded split of the chunks into train,validation,test fractions, e.g. 0.8,0.1,0.1.
    #[arg(long, value_delimiter = ',', value_name = "A,B,C")]
    pub split: Option<Vec<f64>>,
    #[command(flatten)]
    pub emoji: EmojiArg,
    #[command(flatten)]
    pub normalizer: NormalizerArg,
}

#[derive(Debug, Args)]
pub struct MaskAuditArgs {
    /// Model providing the mask, unknown and special ids and the replacement pool.
    #[arg(long)]
    pub model: PathBuf,
    /// A .chunks file.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub epochs: u64,
    /// Required when the model has no <mask> piece.
    #[arg(long)]
    pub mask_id: Option<u32>,
    #[arg(long, default_value = "0.15")]
    pub mask_ratio: String,
    #[arg(long, default_value = "0.8")]
    pub p_mask: String,
    #[arg(long, default_value = "0.1")]
    pub p_random: String,
    #[arg(long, default_value = "0.1")]
    pub p_keep: String,
    /// Write every masked sequence as a JSON line.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TableFormat {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    /// Last step (inclusive).
    #[arg(long)]
    pub until: u64,
    /// Step stride between rows.
    #[arg(long, default_value_t = 1000)]
    pub every: u64,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: TableFormat,
    #[arg(long, default_value_t = 3e-4)]
    pub peak_lr: f64,
    #[arg(long, default_value_t = 2.6)]
    pub decay_factor: f64,
    #[arg(long, default_value_t = 24_000)]
    pub warmup_steps: u64,
    #[arg(long, default_value_t = 500_000)]
    pub max_steps: u64,
    #[arg(long, default_value_t = 1_000)]
    pub unfreeze_interval: u64,
    /// Step at which the warmup restarts. Repeatable.
    #[arg(long = "reset")]
    pub resets: Vec<u64>,
    /// Same rate for every layer.
    #[arg(long)]
    pub no_discriminative: bool,
    #[arg(long, default_value_t = 1)]
    pub scheduler_steps_per_update: u64,
    /// Write rows here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitEmbeddingsArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// First added id. Alternatively read from --report.
    #[arg(long, required_unless_present = "report")]
    pub boundary: Option<usize>,
    /// Transfer report whose boundary_id to use.
    #[arg(long, conflicts_with = "boundary")]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub old_out: PathBuf,
    #[arg(long)]
    pub new_out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MergeEmbeddingsArgs {
    #[arg(long)]
    pub old: PathBuf,
    #[arg(long)]
    pub new: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InitSchemeArg {
    /// Normal with the per-dimension mean and deviation of the existing rows.
    Normal,
    Zero,
}

#[derive(Debug, Args)]
pub struct InitEmbeddingsArgs {
    /// Existing-vocabulary table.
    #[arg(long)]
    pub old: PathBuf,
    /// Number of added rows. Alternatively derived from --model.
    #[arg(long, required_unless_present = "model")]
    pub rows: Option<usize>,
    /// Expanded model; rows = model size - existing rows.
    #[arg(long, conflicts_with = "rows")]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "normal")]
    pub scheme: InitSchemeArg,
    /// Destination of the added-vocabulary table.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VocabReportArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Also count piece kinds from this id onward.
    #[arg(long)]
    pub boundary: Option<usize>,
}
