use std::fs;
use std::io::{self, Write};
use std::path::Path;

use gmdalign_core::corpus::{
    read_doc_pairs, read_embedding_matrix, read_gold, read_manifest, read_pairs, write_doc_pairs, CorpusError,
    Document, EmbeddingMatrix, ParallelPairSet,
};
use gmdalign_core::gmd::{exact_emd, greedy_movers_distance, sentence_costs};
use gmdalign_core::learners::{
    build_constraints, itml::train_itml, sdml::train_sdml, ItmlConfig, NegativeSamplingConfig, SdmlConfig,
};
use gmdalign_core::metric::{load_metric, save_metric, MetricKind};
use gmdalign_core::pipeline::{self, evaluate, format_significant, write_scored_tsv, AlignConfig};
use gmdalign_core::synth::{generate, SynthConfig};
use gmdalign_core::weighting::{build_idf_table, weigh, IdfTable};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::runlog::{derive_seed, RunManifest};
use crate::{AlgoArg, AlignArgs, CliError, DocInputs, EvalArgs, GmdArgs, MetricArg, SynthArgs, TrainArgs};

fn print_json(v: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(v).expect("json serializes");
    text.push('\n');
    print_stdout(&text)
}

/// Writes to standard output; a closed pipe (`| head`) is not an error.
fn print_stdout(text: &str) -> Result<(), CliError> {
    let mut out = io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(CliError::Io(format!("standard output: {e}"))),
        _ => Ok(()),
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn train(a: TrainArgs) -> Result<(), CliError> {
    let mut manifest = RunManifest::new("train", json!(null));
    manifest.input("src_emb", &a.src_emb)?;
    manifest.input("tgt_emb", &a.tgt_emb)?;
    let pairs_digest = manifest.input("pairs", &a.pairs)?;

    let src = read_embedding_matrix(&a.src_emb)?;
    let tgt = read_embedding_matrix(&a.tgt_emb)?;
    let mut pairs = read_pairs(&a.pairs)?;
    if let Some(s) = a.shuffle_seed {
        let mut v = pairs.pairs().to_vec();
        v.shuffle(&mut ChaCha8Rng::seed_from_u64(s));
        pairs = ParallelPairSet::new(v)?;
    }
    if let Some(limit) = a.pair_limit {
        if limit > pairs.len() {
            return Err(CliError::Validation(format!(
                "--pair-limit {limit} exceeds the {} pairs in {}",
                pairs.len(),
                a.pairs.display()
            )));
        }
        pairs = pairs.prefix(limit)?;
    }
    let (seed, seed_source) = match a.seed {
        Some(s) => (s, "explicit"),
        None => {
            let s = derive_seed(&pairs_digest);
            log::info!("no --seed given; derived {s} from the pairs file checksum");
            (s, "derived")
        }
    };

    let neg = NegativeSamplingConfig {
        ratio: a.neg_ratio,
        seed,
    };
    let constraints = build_constraints(&pairs, &src, &tgt, &neg)?;
    let (trained, learner) = match a.algo {
        AlgoArg::Itml => {
            let d = ItmlConfig::default();
            let cfg = ItmlConfig {
                gamma: a.gamma,
                max_iter: a.max_iter.unwrap_or(d.max_iter),
                tol: a.tol.unwrap_or(d.tol),
                u_percentile: a.u_percentile,
                l_percentile: a.l_percentile,
                prior: a.prior.into(),
                seed,
            };
            (train_itml(&constraints, &cfg)?, json!(cfg))
        }
        AlgoArg::Sdml => {
            let d = SdmlConfig::default();
            let cfg = SdmlConfig {
                sparsity_param: a.sparsity,
                balance_param: a.balance,
                max_iter: a.max_iter.unwrap_or(d.max_iter),
                tol: a.tol.unwrap_or(d.tol),
                prior: a.prior.into(),
                seed,
            };
            (train_sdml(&constraints, &cfg)?, json!(cfg))
        }
    };
    save_metric(&trained.metric, &a.out)?;

    manifest.config = json!({
        "algorithm": trained.metric.provenance().algorithm,
        "seed": seed,
        "seed_source": seed_source,
        "pairs_used": pairs.len(),
        "pair_limit": a.pair_limit,
        "shuffle_seed": a.shuffle_seed,
        "negative_sampling": neg,
        "learner": learner,
    });
    manifest.outputs.push(a.out.display().to_string());
    let run_path = a.out.with_file_name(format!(
        "{}.run.json",
        a.out.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default()
    ));
    manifest.write(&run_path)?;

    print_json(&json!({
        "output": a.out.display().to_string(),
        "algorithm": trained.metric.provenance().algorithm,
        "seed": seed,
        "seed_source": seed_source,
        "pairs_used": pairs.len(),
        "report": trained.report,
    }))
}

struct Loaded {
    src_emb: EmbeddingMatrix,
    src_docs: Vec<Document>,
    tgt_emb: EmbeddingMatrix,
    tgt_docs: Vec<Document>,
    metric: MetricKind,
}

fn load_inputs(inputs: &DocInputs, manifest: &mut RunManifest) -> Result<Loaded, CliError> {
    manifest.input("src_emb", &inputs.src_emb)?;
    manifest.input("src_manifest", &inputs.src_manifest)?;
    manifest.input("tgt_emb", &inputs.tgt_emb)?;
    manifest.input("tgt_manifest", &inputs.tgt_manifest)?;
    let metric = match &inputs.metric {
        MetricArg::Euclidean => MetricKind::Euclidean,
        MetricArg::Cosine => MetricKind::CosineDistance,
        MetricArg::Learned(p) => {
            manifest.input("metric", p)?;
            MetricKind::Mahalanobis(load_metric(p)?)
        }
    };
    let src_emb = read_embedding_matrix(&inputs.src_emb)?;
    let tgt_emb = read_embedding_matrix(&inputs.tgt_emb)?;
    if src_emb.dim() != tgt_emb.dim() {
        return Err(CliError::Validation(format!(
            "source embeddings have dimension {} but target embeddings have {}",
            src_emb.dim(),
            tgt_emb.dim()
        )));
    }
    metric.check_dim(src_emb.dim())?;
    let src_docs = read_manifest(&inputs.src_manifest, &src_emb)?;
    let tgt_docs = read_manifest(&inputs.tgt_manifest, &tgt_emb)?;
    Ok(Loaded {
        src_emb,
        src_docs,
        tgt_emb,
        tgt_docs,
        metric,
    })
}

pub fn align(a: AlignArgs) -> Result<(), CliError> {
    let mut manifest = RunManifest::new("align", json!(null));
    let l = load_inputs(&a.inputs, &mut manifest)?;
    let gold = match &a.gold {
        Some(p) => {
            manifest.input("gold", p)?;
            let g = read_gold(p)?;
            g.validate(&l.src_docs, &l.tgt_docs)?;
            Some(g)
        }
        None => None,
    };
    create_dir(&a.out_dir)?;

    let cfg = AlignConfig {
        weighting: a.inputs.weighting,
        matching: a.matching,
        date_filter: a.date_filter,
    };
    let result = pipeline::align(&l.src_docs, &l.src_emb, &l.tgt_docs, &l.tgt_emb, &l.metric, &cfg)?;

    let scored_path = a.out_dir.join("scored.tsv");
    let matched_path = a.out_dir.join("matched.tsv");
    write_scored_tsv(&result.scored, &scored_path)?;
    write_doc_pairs(&result.matched, Some("src_id\ttgt_id"), &matched_path)?;
    manifest.outputs = vec!["scored.tsv".into(), "matched.tsv".into()];

    let mut summary = json!({
        "candidates": result.config_echo.candidates,
        "scored": result.scored.len(),
        "matched": result.matched.len(),
    });
    if let Some(g) = &gold {
        let report = evaluate(&result.matched, g)?;
        let recall_path = a.out_dir.join("recall.json");
        let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
        text.push('\n');
        fs::write(&recall_path, text).map_err(|e| CliError::io(&recall_path, e))?;
        manifest.outputs.push("recall.json".into());
        eprintln!("recall {:.4} ({}/{})", report.recall, report.found, report.gold_size);
        summary["recall"] = json!(report.recall);
        summary["found"] = json!(report.found);
        summary["gold_size"] = json!(report.gold_size);
    }
    manifest.config = json!(result.config_echo);
    manifest.outputs.push("run_manifest.json".into());
    manifest.write(&a.out_dir.join("run_manifest.json"))?;
    print_json(&summary)
}

pub fn eval(a: EvalArgs) -> Result<(), CliError> {
    let matched = read_doc_pairs(&a.matched)?;
    let gold = read_gold(&a.gold)?;
    let report = evaluate(&matched, &gold)?;
    eprintln!("recall {:.4} ({}/{})", report.recall, report.found, report.gold_size);
    print_json(&json!(report))
}

fn side_table(docs: &[Document], inputs: &DocInputs) -> IdfTable {
    if inputs.weighting.needs_idf() {
        build_idf_table(docs)
    } else {
        IdfTable::default()
    }
}

fn find_doc<'a>(docs: &'a [Document], id: &str, side: &'static str) -> Result<&'a Document, CliError> {
    docs.iter().find(|d| d.doc_id == id).ok_or_else(|| {
        CorpusError::UnknownDocId {
            side,
            doc_id: id.to_string(),
        }
        .into()
    })
}

pub fn gmd(a: GmdArgs) -> Result<(), CliError> {
    let mut manifest = RunManifest::new("gmd", json!(null));
    let l = load_inputs(&a.inputs, &mut manifest)?;
    let s = find_doc(&l.src_docs, &a.src_doc, "source")?;
    let t = find_doc(&l.tgt_docs, &a.tgt_doc, "target")?;
    let ws = weigh(s, a.inputs.weighting, &side_table(&l.src_docs, &a.inputs)).map_err(|e| CliError::Compute(e.to_string()))?;
    let wt = weigh(t, a.inputs.weighting, &side_table(&l.tgt_docs, &a.inputs)).map_err(|e| CliError::Compute(e.to_string()))?;
    let (distance, trace) = greedy_movers_distance(&ws, &wt, &l.metric, &l.src_emb, &l.tgt_emb)?;

    let mut out = String::new();
    out.push_str(&format!(
        "# src_doc={}\ttgt_doc={}\tmetric={}\tweighting={}\n",
        s.doc_id,
        t.doc_id,
        l.metric.name(),
        a.inputs.weighting
    ));
    out.push_str(&format!("# gmd\t{}\n", format_significant(distance, 9)));
    if a.exact {
        let cost = sentence_costs(&ws, &wt, &l.metric, &l.src_emb, &l.tgt_emb)?;
        let exact = exact_emd(ws.weights(), wt.weights(), &cost)?;
        out.push_str(&format!("# exact_emd\t{}\n", format_significant(exact, 9)));
    }
    out.push_str("source\ttarget\tsrc_row\ttgt_row\tflow\tdistance\n");
    for m in &trace.moves {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            m.source,
            m.target,
            s.sentences[m.source].emb_row,
            t.sentences[m.target].emb_row,
            format_significant(m.flow, 9),
            format_significant(m.distance, 9)
        ));
    }
    print_stdout(&out)
}

pub fn synth(a: SynthArgs) -> Result<(), CliError> {
    let cfg = SynthConfig {
        docs: a.docs,
        sentences_per_doc: a.sentences_per_doc,
        dim: a.dim,
        noise: a.noise,
        transform: a.transform,
        seed: a.seed,
        pairs: a.pairs,
        days: a.days,
    };
    let corpus = generate(&cfg)?;
    create_dir(&a.out_dir)?;
    let paths = corpus.write(&a.out_dir)?;

    let mut manifest = RunManifest::new("synth", json!(cfg));
    manifest.outputs = paths
        .iter()
        .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
        .collect();
    manifest.outputs.push("run_manifest.json".into());
    manifest.write(&a.out_dir.join("run_manifest.json"))?;
    print_json(&json!({
        "out_dir": a.out_dir.display().to_string(),
        "docs": corpus.src_docs.len(),
        "rows": corpus.src_emb.rows(),
        "pairs": corpus.pairs.len(),
        "seed": cfg.seed,
    }))
}
