#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_gmdalign"));
    c.env_remove("GMDALIGN_LOG");
    c
}

/// Runs `gmdalign` with `args` in `cwd`.
pub fn run_in(cwd: &Path, args: &[&str]) -> Output {
    bin().current_dir(cwd).args(args).output().expect("spawn gmdalign")
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn gmdalign")
}

pub fn ok(out: Output) -> Output {
    assert!(
        out.status.success(),
        "gmdalign failed ({:?}): {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

/// The synthetic corpus parameters committed under `tests/fixtures`.
pub fn fixture_args() -> Vec<String> {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/synthetic.json"))
        .expect("fixture");
    let v: serde_json::Value = serde_json::from_str(&text).expect("fixture json");
    let mut args = Vec::new();
    for key in ["docs", "sentences_per_doc", "dim", "noise", "transform", "seed", "pairs", "days"] {
        let val = &v[key];
        assert!(!val.is_null(), "fixture lacks {key}");
        args.push(format!("--{}", key.replace('_', "-")));
        args.push(match val {
            serde_json::Value::String(s) => s.clone(),
            other => other.to_string(),
        });
    }
    args
}

/// Writes a synthetic corpus into `dir` with `extra` synth flags.
pub fn synth(dir: &Path, extra: &[&str]) -> PathBuf {
    let mut args = vec!["synth", "--out-dir", s(dir)];
    args.extend_from_slice(extra);
    ok(run(&args));
    dir.to_path_buf()
}

pub fn doc_args(corpus: &Path) -> Vec<String> {
    [
        ("--src-emb", "src.emb"),
        ("--src-manifest", "src.jsonl"),
        ("--tgt-emb", "tgt.emb"),
        ("--tgt-manifest", "tgt.jsonl"),
    ]
    .iter()
    .flat_map(|(flag, file)| [flag.to_string(), corpus.join(file).display().to_string()])
    .collect()
}

pub fn train_args(corpus: &Path) -> Vec<String> {
    [("--src-emb", "src.emb"), ("--tgt-emb", "tgt.emb"), ("--pairs", "pairs.tsv")]
        .iter()
        .flat_map(|(flag, file)| [flag.to_string(), corpus.join(file).display().to_string()])
        .collect()
}

pub fn strs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

/// `recall` from the JSON an `align --gold` run prints.
pub fn recall_of(out: &Output) -> f64 {
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).expect("align json");
    v["recall"].as_f64().unwrap_or_else(|| panic!("no recall in {v}"))
}
