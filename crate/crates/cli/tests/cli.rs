mod common;

use std::fs;

use common::*;
use gmdalign_core::metric::{save_metric, MahalanobisMetric};
use tempfile::TempDir;

fn small_corpus() -> TempDir {
    let dir = TempDir::new().unwrap();
    synth(
        dir.path(),
        &["--docs", "40", "--dim", "8", "--pairs", "600", "--noise", "1.0", "--transform", "affine", "--seed", "3"],
    );
    dir
}

fn code(args: &[&str]) -> (i32, String) {
    let o = run(args);
    (o.status.code().unwrap(), String::from_utf8_lossy(&o.stderr).into_owned())
}

fn align_into(corpus: &TempDir, out: &std::path::Path, extra: &[&str]) -> std::process::Output {
    let mut args = vec!["align".to_string(), "--out-dir".into(), out.display().to_string()];
    args.extend(doc_args(corpus.path()));
    args.extend(extra.iter().map(|s| s.to_string()));
    run(&strs(&args))
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&["--help"]).0, 0);
    assert_eq!(code(&["--version"]).0, 0);
}

#[test]
fn usage_errors_exit_three() {
    assert_eq!(code(&[]).0, 3);
    assert_eq!(code(&["frobnicate"]).0, 3);
    assert_eq!(code(&["train", "--algo", "lmnn"]).0, 3);
}

#[test]
fn missing_pairs_file_is_io() {
    let c = small_corpus();
    let out = c.path().join("m.metric");
    let mut args = vec!["train", "--algo", "itml", "--out", s(&out)];
    let ta = train_args(c.path());
    let mut ta: Vec<&str> = strs(&ta);
    let missing = c.path().join("nope.tsv");
    ta[5] = s(&missing);
    args.extend(ta);
    let (rc, err) = code(&args);
    assert_eq!(rc, 2, "{err}");
    assert!(err.contains("nope.tsv"), "{err}");
}

#[test]
fn zero_pair_limit_is_validation() {
    let c = small_corpus();
    let out = c.path().join("m.metric");
    let ta = train_args(c.path());
    let mut args = vec!["train", "--algo", "itml", "--out", s(&out), "--pair-limit", "0"];
    args.extend(strs(&ta));
    let (rc, err) = code(&args);
    assert_eq!(rc, 3);
    assert!(err.contains("at least 1"), "{err}");
    assert!(!out.exists());
}

#[test]
fn pair_limit_beyond_file_is_validation() {
    let c = small_corpus();
    let out = c.path().join("m.metric");
    let ta = train_args(c.path());
    let mut args = vec!["train", "--algo", "itml", "--out", s(&out), "--pair-limit", "601"];
    args.extend(strs(&ta));
    assert_eq!(code(&args).0, 3);
}

#[test]
fn unknown_weighting_lists_choices() {
    let c = small_corpus();
    let out = c.path().join("out");
    let o = align_into(&c, &out, &["--weighting", "tfidf"]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    for name in ["uniform", "sl", "idf", "slidf"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn metric_dimension_mismatch_is_validation() {
    let c = small_corpus();
    let m = c.path().join("wrong.metric");
    save_metric(&MahalanobisMetric::identity(5), &m).unwrap();
    let o = align_into(&c, &c.path().join("out"), &["--metric", &format!("learned:{}", m.display())]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn empty_gold_is_validation() {
    let dir = TempDir::new().unwrap();
    let gold = dir.path().join("gold.tsv");
    let matched = dir.path().join("matched.tsv");
    fs::write(&gold, "# nothing here\n").unwrap();
    fs::write(&matched, "a\tx\n").unwrap();
    let (rc, _) = code(&["eval", "--matched", s(&matched), "--gold", s(&gold)]);
    assert_eq!(rc, 3);
}

fn eval_recall(matched: &str, gold: &str) -> f64 {
    let dir = TempDir::new().unwrap();
    let (m, g) = (dir.path().join("m.tsv"), dir.path().join("g.tsv"));
    fs::write(&m, matched).unwrap();
    fs::write(&g, gold).unwrap();
    let o = ok(run(&["eval", "--matched", s(&m), "--gold", s(&g)]));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    v["recall"].as_f64().unwrap()
}

#[test]
fn eval_counts_gold_pairs_found() {
    let gold = "a\tw\nb\tx\nc\ty\nd\tz\n";
    assert_eq!(eval_recall("a\tw\nb\tx\nc\ty\nd\tq\n", gold), 0.75);
    assert_eq!(eval_recall(gold, gold), 1.0);
}

#[test]
fn identity_metric_file_matches_euclidean() {
    let c = small_corpus();
    let m = c.path().join("identity.metric");
    save_metric(&MahalanobisMetric::identity(8), &m).unwrap();
    let (a, b) = (c.path().join("eu"), c.path().join("id"));
    ok(align_into(&c, &a, &["--metric", "euclidean"]));
    ok(align_into(&c, &b, &["--metric", &format!("learned:{}", m.display())]));
    assert_eq!(fs::read(a.join("matched.tsv")).unwrap(), fs::read(b.join("matched.tsv")).unwrap());
    assert_eq!(fs::read(a.join("scored.tsv")).unwrap(), fs::read(b.join("scored.tsv")).unwrap());
}

#[test]
fn align_writes_outputs_and_recall() {
    let c = small_corpus();
    let out = c.path().join("out");
    let gold = c.path().join("gold.tsv");
    let o = ok(align_into(&c, &out, &["--gold", s(&gold)]));
    let r = recall_of(&o);
    assert!((0.0..=1.0).contains(&r));
    for f in ["scored.tsv", "matched.tsv", "recall.json", "run_manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let scored = fs::read_to_string(out.join("scored.tsv")).unwrap();
    assert_eq!(scored.lines().next(), Some("# src_id\ttgt_id\tdistance"));
    assert_eq!(scored.lines().count(), 1 + 40 * 40);
    let matched = fs::read_to_string(out.join("matched.tsv")).unwrap();
    assert_eq!(matched.lines().count(), 1 + 40);
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join("run_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "align");
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 5);
}

#[test]
fn train_reports_and_derives_seed() {
    let c = small_corpus();
    let out = c.path().join("itml.metric");
    let ta = train_args(c.path());
    let mut args = vec!["train", "--algo", "itml", "--out", s(&out), "--pair-limit", "200"];
    args.extend(strs(&ta));
    let first = ok(run(&args));
    let v: serde_json::Value = serde_json::from_slice(&first.stdout).unwrap();
    assert_eq!(v["pairs_used"], 200);
    assert_eq!(v["seed_source"], "derived");
    assert_eq!(v["report"]["similar"], 200);
    let bytes = fs::read(&out).unwrap();
    let again = ok(run(&args));
    assert_eq!(first.stdout, again.stdout);
    assert_eq!(bytes, fs::read(&out).unwrap());
    assert!(c.path().join("itml.metric.run.json").exists());
}

#[test]
fn pair_limit_takes_a_prefix() {
    // Training on a prefix equals training on a file holding only that prefix.
    let c = small_corpus();
    let text = fs::read_to_string(c.path().join("pairs.tsv")).unwrap();
    let mut kept = 0;
    let prefix: String = text
        .lines()
        .filter(|l| {
            if l.starts_with('#') {
                return true;
            }
            kept += 1;
            kept <= 150
        })
        .map(|l| format!("{l}\n"))
        .collect();
    let short = c.path().join("short.tsv");
    fs::write(&short, prefix).unwrap();

    let (a, b) = (c.path().join("a.metric"), c.path().join("b.metric"));
    let src = c.path().join("src.emb");
    let tgt = c.path().join("tgt.emb");
    let pairs = c.path().join("pairs.tsv");
    let base = ["train", "--algo", "sdml", "--seed", "9", "--src-emb", s(&src), "--tgt-emb", s(&tgt)];
    let mut one = base.to_vec();
    one.extend(["--pairs", s(&pairs), "--pair-limit", "150", "--out", s(&a)]);
    let mut two = base.to_vec();
    two.extend(["--pairs", s(&short), "--out", s(&b)]);
    ok(run(&one));
    ok(run(&two));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn gmd_prints_flows_and_exact_bound() {
    let c = small_corpus();
    let mut args = vec!["gmd".to_string(), "--src-doc".into(), "s00001".into(), "--tgt-doc".into(), "t00001".into()];
    args.extend(doc_args(c.path()));
    args.push("--exact".into());
    let o = run(&strs(&args));
    // Documents may exceed the exact solver's size limit; that is a compute error.
    if o.status.code() == Some(1) {
        return;
    }
    let o = ok(o);
    let text = String::from_utf8(o.stdout).unwrap();
    let value = |key: &str| -> f64 {
        let line = text.lines().find(|l| l.starts_with(key)).unwrap_or_else(|| panic!("{key} in {text}"));
        line.split('\t').nth(1).unwrap().parse().unwrap()
    };
    assert!(value("# gmd") >= value("# exact_emd") - 1e-9);
    let flows: f64 = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("source"))
        .map(|l| l.split('\t').nth(4).unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((flows - 1.0).abs() < 1e-9);
}

#[test]
fn unknown_document_is_validation() {
    let c = small_corpus();
    let mut args = vec!["gmd".to_string(), "--src-doc".into(), "nope".into(), "--tgt-doc".into(), "t00001".into()];
    args.extend(doc_args(c.path()));
    assert_eq!(run(&strs(&args)).status.code(), Some(3));
}

#[test]
fn date_filter_without_dates_is_validation() {
    let dir = TempDir::new().unwrap();
    let c = small_corpus();
    // Strip dates from the source manifest.
    let src = fs::read_to_string(c.path().join("src.jsonl")).unwrap();
    let stripped: String = src
        .lines()
        .map(|l| {
            let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
            v.as_object_mut().unwrap().remove("date");
            format!("{v}\n")
        })
        .collect();
    fs::write(c.path().join("src.jsonl"), stripped).unwrap();
    let o = align_into(&c, &dir.path().join("out"), &["--date-filter"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn date_filter_keeps_same_day_candidates() {
    let dir = TempDir::new().unwrap();
    synth(dir.path(), &["--docs", "30", "--dim", "8", "--pairs", "100", "--days", "5", "--seed", "4"]);
    let corpus = dir.path();
    let out = corpus.join("out");
    let mut args = vec!["align".to_string(), "--date-filter".into(), "--out-dir".into(), out.display().to_string()];
    args.extend(doc_args(corpus));
    args.extend(["--gold".into(), corpus.join("gold.tsv").display().to_string()]);
    let o = ok(run(&strs(&args)));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["candidates"].as_u64().unwrap() < 30 * 30);
    // Gold pairs share a date, so a noiseless corpus is still fully recovered.
    assert_eq!(v["recall"], 1.0);
}

#[test]
fn log_level_from_environment() {
    let c = small_corpus();
    let out = c.path().join("m.metric");
    let ta = train_args(c.path());
    let mut args = vec!["train", "--algo", "itml", "--out", s(&out), "--pair-limit", "100"];
    args.extend(strs(&ta));
    let quiet = bin().args(&args).output().unwrap();
    let loud = bin().env("GMDALIGN_LOG", "info").args(&args).output().unwrap();
    assert!(loud.stderr.len() > quiet.stderr.len());
    assert!(String::from_utf8_lossy(&loud.stderr).contains("derived"));
}
