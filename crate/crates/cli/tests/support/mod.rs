#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const BIN: &str = env!("CARGO_BIN_EXE_vocab-graft");

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

pub fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .current_dir(dir)
        .env_remove("VOCAB_GRAFT_EMOJI_DATA")
        .output()
        .unwrap()
}

pub fn last_json(out: &Output) -> serde_json::Value {
    let stdout = String::from_utf8_lossy(&out.stdout);
    serde_json::from_str(stdout.lines().last().unwrap_or("")).unwrap_or_else(|_| panic!("no JSON result in {stdout:?}"))
}

pub const DONOR: &str = "#format=vocab-graft-model\n#version=1\n#unk_id=0\n#mask_id=5\n\
#max_char_repeat=3\n#preserve_space=true\n#lowercase=true\n\
0\t<unk>\t0\tunknown\n1\tgraft\t-3.5\tnormal\n2\tกขค\t-1\tnormal\n3\tvocab\t-2.25\tnormal\n4\t<s>\t0\tcontrol\n5\t<mask>\t0\tcontrol\n";

pub const CORPUS: &str = "Hello world 👍🏽\nสวัสดี transfer vocab graft\n\n{not json here\nกขค 😀😀😀😀\n";

/// Recipient in canonical form, a donor, a corpus and a small emoji file.
pub fn setup(dir: &Path) {
    let out = run(dir, &["import-spm", "--input", fixture("tiny_unigram.model").to_str().unwrap(), "--out", "r.vgm"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    fs::write(dir.join("d.vgm"), DONOR).unwrap();
    fs::write(dir.join("corpus.txt"), CORPUS).unwrap();
    fs::write(dir.join("emoji.txt"), "# Version: test\n1F600 ; Basic_Emoji # x\n1F44D 1F3FD ; RGI_Emoji_Modifier_Sequence # y\n").unwrap();
}

/// Each step of a full session, run from `dir`; returns stdout per step.
pub fn session(dir: &Path) -> Vec<(String, Vec<u8>)> {
    setup(dir);
    let steps: Vec<Vec<&str>> = vec![
        vec!["import-spm", "--input", "r.vgm.src", "--out", "r2.vgm"],
        vec!["transfer", "--recipient", "r.vgm", "--donor", "d.vgm", "--out", "m.vgm", "--report", "rep.json"],
        vec!["tokenize", "--model", "m.vgm", "--input", "corpus.txt"],
        vec!["decode", "--model", "m.vgm", "--ids", "5,3,60,61,4000"],
        vec!["oov", "--model-a", "r.vgm", "--model-b", "m.vgm", "--corpus", "c=corpus.txt", "--format", "table"],
        vec!["diff", "--model-a", "r.vgm", "--model-b", "m.vgm", "--input", "corpus.txt"],
        vec!["chunk", "--model", "m.vgm", "--input", "corpus.txt", "--out-dir", "out", "--limit", "8", "--split", "0.5,0.25,0.25", "--threads", "3"],
        vec!["chunk", "--model", "m.vgm", "--input", "corpus.txt", "--out-dir", "out", "--name", "np", "--no-pack"],
        vec!["mask-audit", "--model", "m.vgm", "--mask-id", "60", "--input", "out/np.chunks", "--epochs", "3", "--out", "masked.jsonl", "--seed", "7"],
        vec!["schedule-dump", "--until", "30000", "--every", "500", "--reset", "20000"],
        vec!["schedule", "dump", "--until", "5000", "--format", "json", "--out", "sched.jsonl"],
        vec!["init-embeddings", "--old", "old.emb", "--model", "m.vgm", "--out", "new.emb", "--seed", "3"],
        vec!["merge-embeddings", "--old", "old.emb", "--new", "new.emb", "--out", "full.emb"],
        vec!["split-embeddings", "--input", "full.emb", "--report", "rep.json", "--old-out", "o2.emb", "--new-out", "n2.emb"],
        vec!["vocab-report", "--model", "m.vgm", "--boundary", "60"],
    ];
    fs::copy(fixture("tiny_unigram.model"), dir.join("r.vgm.src")).unwrap();
    // 60 x 4 existing table
    let mut emb = Vec::new();
    emb.extend_from_slice(b"VGEMBED\0");
    emb.extend_from_slice(&1u32.to_le_bytes());
    emb.extend_from_slice(&60u64.to_le_bytes());
    emb.extend_from_slice(&4u64.to_le_bytes());
    for i in 0..240u32 {
        emb.extend_from_slice(&((i as f32).sin()).to_le_bytes());
    }
    fs::write(dir.join("old.emb"), emb).unwrap();
    let mut outputs = Vec::new();
    for args in steps {
        let out = run(dir, &args);
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        last_json(&out);
        outputs.push((args.join(" "), out.stdout));
    }
    outputs
}

pub fn files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

