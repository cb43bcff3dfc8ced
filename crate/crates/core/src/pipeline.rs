//! End-to-end alignment: candidate generation, GMD scoring, matching and
//! recall.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusError, Document, EmbeddingMatrix, GoldAlignment};
use crate::gmd::{greedy_movers_distance, GmdError};
use crate::metric::MetricKind;
use crate::weighting::{build_idf_table, weigh, IdfTable, WeightedDocument, WeightingError, WeightingScheme};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{side} document {doc_id:?} has no date but date filtering is on")]
    MissingDate { side: &'static str, doc_id: String },
    #[error("gold alignment is empty; recall is undefined")]
    EmptyGold,
    #[error(transparent)]
    Gmd(#[from] GmdError),
    #[error(transparent)]
    Weighting(#[from] WeightingError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("failed to write {path}: {source}")]
    Io { path: String, source: io::Error },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchStrategy {
    /// Competitive linking: each document is used at most once.
    #[default]
    OneToOne,
    /// Each source takes its nearest target; targets may repeat.
    ArgminPerSource,
}

impl MatchStrategy {
    pub const ALL: [MatchStrategy; 2] = [MatchStrategy::OneToOne, MatchStrategy::ArgminPerSource];
}

impl fmt::Display for MatchStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatchStrategy::OneToOne => "one-to-one",
            MatchStrategy::ArgminPerSource => "argmin-per-source",
        })
    }
}

impl FromStr for MatchStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|m| m.to_string() == s)
            .ok_or_else(|| format!("unknown matching {s:?} (valid: one-to-one, argmin-per-source)"))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignConfig {
    pub weighting: WeightingScheme,
    pub matching: MatchStrategy,
    pub date_filter: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredPair {
    pub src_id: String,
    pub tgt_id: String,
    pub distance: f64,
}

/// Resolved settings of one alignment run, echoed into its outputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub metric: String,
    #[serde(flatten)]
    pub config: AlignConfig,
    pub source_docs: usize,
    pub target_docs: usize,
    pub candidates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignmentResult {
    pub scored: Vec<ScoredPair>,
    pub matched: Vec<(String, String)>,
    pub config_echo: ConfigEcho,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecallReport {
    pub gold_size: usize,
    pub found: usize,
    pub recall: f64,
    pub missed: Vec<(String, String)>,
}

/// Index pairs `(source, target)` to score, in source-major order. With the
/// date filter on, only documents published on the same day are paired.
pub fn candidate_pairs(
    src_docs: &[Document],
    tgt_docs: &[Document],
    date_filter: bool,
) -> Result<Vec<(usize, usize)>, PipelineError> {
    if !date_filter {
        return Ok((0..src_docs.len())
            .flat_map(|i| (0..tgt_docs.len()).map(move |j| (i, j)))
            .collect());
    }
    let dates = |docs: &[Document], side: &'static str| {
        docs.iter()
            .map(|d| {
                d.date.ok_or_else(|| PipelineError::MissingDate {
                    side,
                    doc_id: d.doc_id.clone(),
                })
            })
            .collect::<Result<Vec<_>, _>>()
    };
    let sd = dates(src_docs, "source")?;
    let td = dates(tgt_docs, "target")?;
    let mut out = Vec::new();
    for (i, a) in sd.iter().enumerate() {
        for (j, b) in td.iter().enumerate() {
            if a == b {
                out.push((i, j));
            }
        }
    }
    Ok(out)
}

fn idf_table_for(docs: &[Document], scheme: WeightingScheme) -> IdfTable {
    if scheme.needs_idf() {
        build_idf_table(docs)
    } else {
        IdfTable::default()
    }
}

fn weigh_all<'a>(docs: &'a [Document], scheme: WeightingScheme) -> Result<Vec<WeightedDocument<'a>>, PipelineError> {
    let table = idf_table_for(docs, scheme);
    Ok(docs
        .iter()
        .map(|d| weigh(d, scheme, &table))
        .collect::<Result<Vec<_>, _>>()?)
}

/// Total order used for scored lists: distance, then source id, then target id.
pub fn scored_order(a: &ScoredPair, b: &ScoredPair) -> Ordering {
    a.distance
        .total_cmp(&b.distance)
        .then_with(|| a.src_id.cmp(&b.src_id))
        .then_with(|| a.tgt_id.cmp(&b.tgt_id))
}

/// GMD for every candidate. IDF statistics are collected per side over the
/// full document list of that side.
pub fn score_all(
    src_docs: &[Document],
    src_emb: &EmbeddingMatrix,
    tgt_docs: &[Document],
    tgt_emb: &EmbeddingMatrix,
    candidates: &[(usize, usize)],
    scheme: WeightingScheme,
    metric: &MetricKind,
) -> Result<Vec<ScoredPair>, PipelineError> {
    let ws = weigh_all(src_docs, scheme)?;
    let wt = weigh_all(tgt_docs, scheme)?;
    let score = |&(i, j): &(usize, usize)| -> Result<ScoredPair, PipelineError> {
        let (d, _) = greedy_movers_distance(&ws[i], &wt[j], metric, src_emb, tgt_emb)?;
        Ok(ScoredPair {
            src_id: src_docs[i].doc_id.clone(),
            tgt_id: tgt_docs[j].doc_id.clone(),
            distance: d,
        })
    };
    #[cfg(feature = "parallel")]
    let scored: Result<Vec<_>, _> = candidates.par_iter().map(score).collect();
    #[cfg(not(feature = "parallel"))]
    let scored: Result<Vec<_>, _> = candidates.iter().map(score).collect();
    let mut scored = scored?;
    scored.sort_by(scored_order);
    Ok(scored)
}

/// Selects aligned pairs from a scored list. The input order does not
/// matter; it is re-sorted by [`scored_order`] first.
pub fn match_pairs(scored: &[ScoredPair], strategy: MatchStrategy) -> Vec<(String, String)> {
    let mut sorted: Vec<&ScoredPair> = scored.iter().collect();
    sorted.sort_by(|a, b| scored_order(a, b));
    match strategy {
        MatchStrategy::OneToOne => {
            let mut used_src = HashSet::new();
            let mut used_tgt = HashSet::new();
            let mut out = Vec::new();
            for p in sorted {
                if !used_src.contains(p.src_id.as_str()) && !used_tgt.contains(p.tgt_id.as_str()) {
                    used_src.insert(p.src_id.as_str());
                    used_tgt.insert(p.tgt_id.as_str());
                    out.push((p.src_id.clone(), p.tgt_id.clone()));
                }
            }
            out
        }
        MatchStrategy::ArgminPerSource => {
            let mut seen = HashSet::new();
            let mut out: Vec<(String, String)> = sorted
                .into_iter()
                .filter(|p| seen.insert(p.src_id.as_str()))
                .map(|p| (p.src_id.clone(), p.tgt_id.clone()))
                .collect();
            out.sort();
            out
        }
    }
}

/// Recall of `matched` against `gold`. Gold pairs that were never candidates
/// (for example across dates) count as missed.
pub fn evaluate(matched: &[(String, String)], gold: &GoldAlignment) -> Result<RecallReport, PipelineError> {
    if gold.is_empty() {
        return Err(PipelineError::EmptyGold);
    }
    let set: HashSet<(&str, &str)> = matched.iter().map(|(s, t)| (s.as_str(), t.as_str())).collect();
    let missed: Vec<(String, String)> = gold
        .pairs()
        .iter()
        .filter(|(s, t)| !set.contains(&(s.as_str(), t.as_str())))
        .cloned()
        .collect();
    let found = gold.len() - missed.len();
    Ok(RecallReport {
        gold_size: gold.len(),
        found,
        recall: found as f64 / gold.len() as f64,
        missed,
    })
}

/// Candidates, scoring and matching in one call.
pub fn align(
    src_docs: &[Document],
    src_emb: &EmbeddingMatrix,
    tgt_docs: &[Document],
    tgt_emb: &EmbeddingMatrix,
    metric: &MetricKind,
    cfg: &AlignConfig,
) -> Result<AlignmentResult, PipelineError> {
    let candidates = candidate_pairs(src_docs, tgt_docs, cfg.date_filter)?;
    let scored = score_all(src_docs, src_emb, tgt_docs, tgt_emb, &candidates, cfg.weighting, metric)?;
    let matched = match_pairs(&scored, cfg.matching);
    Ok(AlignmentResult {
        scored,
        matched,
        config_echo: ConfigEcho {
            metric: metric.name(),
            config: *cfg,
            source_docs: src_docs.len(),
            target_docs: tgt_docs.len(),
            candidates: candidates.len(),
        },
    })
}

/// `printf("%.{sig}g")`: `sig` significant digits, trailing zeros removed,
/// scientific notation for very small or large magnitudes.
pub fn format_significant(x: f64, sig: usize) -> String {
    assert!(sig >= 1);
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= sig as i32 {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (sig as i32 - 1 - exp) as usize;
        strip_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Writes `src_id<TAB>tgt_id<TAB>distance` rows with 9 significant digits.
pub fn write_scored_tsv(scored: &[ScoredPair], path: impl AsRef<Path>) -> Result<(), PipelineError> {
    let path = path.as_ref();
    let io_err = |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    let mut body = || -> io::Result<()> {
        writeln!(w, "# src_id\ttgt_id\tdistance")?;
        for p in scored {
            writeln!(w, "{}\t{}\t{}", p.src_id, p.tgt_id, format_significant(p.distance, 9))?;
        }
        w.flush()
    };
    body().map_err(io_err)
}
