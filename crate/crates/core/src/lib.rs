//! Vocabulary grafting for unigram tokenizers: canonical model storage,
//! text normalization, Viterbi segmentation, donor-to-recipient vocabulary
//! transfer, split embedding tables, masked-LM corruption, training
//! schedules and a streaming corpus pipeline.

pub mod corpus;
pub mod embedding;
pub mod emoji;
pub mod masking;
pub mod model;
pub mod normalizer;
pub mod schedule;
pub mod spm;
pub mod tokenizer;
pub mod transfer;
mod trie;

pub use corpus::{
    chunk, count_unk, oov_report, segmentation_diff, ChunkOptions, ChunkedDataset, DiffRecord, OovReport,
    PipelineError, Record, RecordReader, UnkCount,
};
pub use embedding::{EmbeddingError, InitScheme, Matrix, SplitEmbeddings};
pub use emoji::{EmojiError, EmojiSet};
pub use masking::{MaskedBatch, Masker, MaskingConfig, MaskingError, Replacement, IGNORE_LABEL};
pub use model::{
    load_canonical, save_canonical, ModelError, PieceKind, SaveOptions, SpecialSurfaces, Specials, TokenId,
    TokenizerModel, VocabPiece,
};
pub use normalizer::{normalize, NormalizedText, NormalizerConfig, SPACE_MARK};
pub use schedule::{LayerStack, ScheduleConfig, ScheduleError};
pub use spm::import_spm;
pub use tokenizer::{decode, encode, Encoding, Token, TokenizeError, Tokenizer};
pub use transfer::{transfer, ScalarRange, TransferError, TransferPolicy, TransferReport};
