mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vocab_graft_core::corpus::{read_chunks, write_dataset, ChunkPacker};
use vocab_graft_core::model::SpecialSurfaces;
use vocab_graft_core::{
    chunk, count_unk, normalize, oov_report, segmentation_diff, transfer, ChunkOptions, EmojiSet, NormalizerConfig,
    PipelineError, Record, RecordReader, Tokenizer, TokenizerModel, TransferPolicy, VocabPiece,
};

fn letters_model() -> TokenizerModel {
    let mut pieces = vec![VocabPiece::unknown("<unk>"), VocabPiece::control("<_>")];
    for (i, c) in ('a'..='z').enumerate() {
        pieces.push(VocabPiece::normal(c.to_string(), -3.0 - i as f32 / 10.0));
    }
    pieces.push(VocabPiece::normal("ab", -2.0));
    TokenizerModel::with_surfaces(pieces, &SpecialSurfaces::default(), NormalizerConfig::default()).unwrap()
}

fn records(texts: &[String]) -> Vec<Result<Record, PipelineError>> {
    texts.iter().enumerate().map(|(index, t)| Ok(Record { index, text: t.clone() })).collect()
}

#[test]
fn chunking_conserves_tokens_and_order() {
    let model = letters_model();
    let tok = Tokenizer::new(&model, &EmojiSet::empty());
    let cfg = *model.normalizer();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let texts: Vec<String> = (0..rng.random_range(0..30))
            .map(|_| {
                let n = rng.random_range(1..300);
                (0..n).map(|_| if rng.random_bool(0.2) { ' ' } else { rng.random_range('a'..='e') }).collect()
            })
            .collect();
        let limit = rng.random_range(1..200);
        let ds = chunk(records(&texts), &tok, &cfg, ChunkOptions { limit, pack: true }).unwrap();
        let encoded: Vec<Vec<u32>> = texts.iter().map(|t| tok.encode(&normalize(t, &cfg)).ids).collect();
        let total: u64 = encoded.iter().map(|e| e.len() as u64).sum();
        assert_eq!(ds.packed_tokens() + ds.discarded_tokens, total);
        assert!(ds.chunks.iter().all(|c| !c.is_empty() && c.len() <= limit));
        let kept: Vec<u32> = encoded.iter().filter(|e| e.len() <= limit).flatten().copied().collect();
        assert_eq!(ds.chunks.concat(), kept);
        assert_eq!(ds.discarded_count, encoded.iter().filter(|e| e.len() > limit).count());
        for (c, span) in ds.chunks.iter().zip(&ds.source_spans) {
            let joined: Vec<u32> = span.iter().flat_map(|&i| encoded[i].clone()).collect();
            assert_eq!(&joined, c);
        }
    }
}

#[test]
fn thread_count_does_not_change_output() {
    let model = letters_model();
    let tok = Tokenizer::new(&model, &EmojiSet::empty());
    let cfg = *model.normalizer();
    let texts: Vec<String> = (0..5000).map(|i| format!("abc {} de", "xyz".repeat(i % 40))).collect();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| chunk(records(&texts), &tok, &cfg, ChunkOptions::default()).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn reference_length_examples() {
    let run = |lengths: &[usize]| {
        let mut p = ChunkPacker::new(ChunkOptions::default()).unwrap();
        for (i, &n) in lengths.iter().enumerate() {
            p.push(i, &vec![1; n]);
        }
        p.finish()
    };
    let ds = run(&[200, 200, 30]);
    assert_eq!(ds.chunks.iter().map(Vec::len).collect::<Vec<_>>(), [400, 30]);
    let ds = run(&[500, 30]);
    assert_eq!(ds.discarded_count, 1);
    assert_eq!(ds.chunks.iter().map(Vec::len).collect::<Vec<_>>(), [30]);
}

#[test]
fn dataset_files_round_trip() {
    let model = letters_model();
    let tok = Tokenizer::new(&model, &EmojiSet::empty());
    let texts: Vec<String> = ["ab ab", "zzz", "hello world"].iter().map(|s| s.to_string()).collect();
    let ds = chunk(records(&texts), &tok, model.normalizer(), ChunkOptions { limit: 6, pack: true }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let all: Vec<usize> = (0..ds.chunks.len()).collect();
    let manifest = write_dataset(dir.path(), "train", &ds, &all, true, &model.checksum()).unwrap();
    let read = read_chunks(std::fs::File::open(dir.path().join("train.chunks")).unwrap()).unwrap();
    assert_eq!(read, ds.chunks);
    assert_eq!(manifest.discarded_count, 1);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("train.manifest.json")).unwrap()).unwrap();
    assert_eq!(json["model_checksum"], model.checksum());
    assert_eq!(json["chunk_count"], ds.chunks.len());
}

#[test]
fn unreadable_record_is_reported_with_index() {
    let model = letters_model();
    let tok = Tokenizer::new(&model, &EmojiSet::empty());
    let input: &[u8] = b"ab\ncd\n\xff\nef\n";
    let err = chunk(RecordReader::new(input), &tok, model.normalizer(), ChunkOptions::default()).unwrap_err();
    assert!(matches!(err, PipelineError::Record { record: 2, .. }), "{err}");
    let err = count_unk(&tok, RecordReader::new(input)).unwrap_err();
    assert!(matches!(err, PipelineError::Record { record: 2, .. }));
}

#[test]
fn emoji_lines_lose_their_unknowns() {
    let a = letters_model();
    let emoji = EmojiSet::pinned();
    let donor = TokenizerModel::with_surfaces(
        vec![VocabPiece::unknown("<unk>"), VocabPiece::normal("q", -1.0)],
        &SpecialSurfaces::default(),
        NormalizerConfig::default(),
    )
    .unwrap();
    let (b, _) = transfer(&a, &donor, &TransferPolicy::default(), &emoji).unwrap();
    let ta = Tokenizer::new(&a, &emoji);
    let tb = Tokenizer::new(&b, &emoji);
    let texts: Vec<String> = ["😀", "👍🏽", "🇹🇭"].iter().map(|s| s.to_string()).collect();
    let (ra, rb) = oov_report(vec![("emoji".to_string(), records(&texts))], &ta, &tb, a.normalizer());
    assert_eq!(ra.per_dataset["emoji"].unk_count, 5);
    assert_eq!(ra.per_dataset["emoji"].percentage, 100.0);
    assert_eq!(rb.per_dataset["emoji"].unk_count, 0);
    assert_eq!(rb.per_dataset["emoji"].total_tokens, 3);

    let (ra, _) = oov_report(
        vec![("broken".to_string(), vec![Err(PipelineError::ZeroLimit)]), ("emoji".to_string(), records(&texts))],
        &ta,
        &tb,
        a.normalizer(),
    );
    assert!(ra.failed.contains_key("broken"));
    assert!(ra.per_dataset.contains_key("emoji"));
}

/// Thai-only text over a Thai-only recipient: a Thai-free donor cannot add a
/// competing path, so no record changes segmentation. Each segmentation is
/// also checked against exhaustive search.
#[test]
fn thai_corpus_has_empty_diff() {
    let thai = ['ก', 'ข', 'ค', 'ง'];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let a = common::random_model(&mut rng, &thai, 15, 3);
        let donor = common::random_model(&mut rng, &['a', 'b', 'c', 'ก'], 30, 3);
        let mut policy = TransferPolicy::default();
        policy.inject_emoji = false;
        let (b, report) = transfer(&a, &donor, &policy, &EmojiSet::empty()).unwrap();
        assert!(report.copied > 0);
        let texts: Vec<String> = (0..50)
            .map(|_| (0..rng.random_range(1..9)).map(|_| thai[rng.random_range(0..4)]).collect())
            .collect();
        let cfg = NormalizerConfig { max_char_repeat: 100, ..Default::default() };
        let ta = Tokenizer::new(&a, &EmojiSet::empty());
        let tb = Tokenizer::new(&b, &EmojiSet::empty());
        let mut diffs = Vec::new();
        let compared = segmentation_diff(records(&texts), &ta, &tb, &cfg, |d| {
            diffs.push(d);
            Ok(())
        })
        .unwrap();
        assert_eq!(compared, texts.len());
        assert!(diffs.is_empty(), "{diffs:?}");
        for t in &texts {
            let enc = tb.encode(&normalize(t, &cfg));
            let chars: Vec<char> = t.chars().collect();
            let (unk, score) = common::brute_best(&chars, &b);
            assert_eq!((enc.unk_count, tb.score_of(&enc.ids).to_bits()), (unk, score.to_bits()));
        }
    }
}
