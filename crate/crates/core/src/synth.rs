//! Deterministic synthetic bilingual corpora with known gold alignments.
//!
//! Source sentence embeddings are standard normal. Each target embedding is a
//! fixed linear map of its source plus Gaussian noise:
//!
//! - `rotation`: a small random rotation and isotropic noise `σ`. With
//!   `σ = 0` translations stay far closer to their sources than to anything
//!   else, so Euclidean alignment is perfect.
//! - `affine`: inside a random "nuisance" subspace (half the dimensions) the
//!   source signal is shrunk and the noise has standard deviation `σ`;
//!   elsewhere the signal passes unchanged and the noise is `σ / 10`. The
//!   result is rotated slightly and offset. Euclidean distance weighs the
//!   nuisance directions fully; a learned metric can discount them.
//!
//! Documents are disjoint groups of sentences, optionally with one sentence
//! drawn from a small shared boilerplate pool (giving IDF something to do).
//! Source document `s{i}` is the translation of target document `t{i}`; the
//! target manifest lists documents in shuffled order. Parallel training pairs
//! are generated from the same process and stored after the document rows.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{Days, NaiveDate};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    write_doc_pairs, write_embedding_matrix, write_manifest, write_pairs, CorpusError, Document, EmbeddingMatrix,
    GoldAlignment, ParallelPairSet, SentenceRef,
};

const ROTATION_SCALE: f64 = 0.02;
const NUISANCE_GAIN: f64 = 0.2;
const OFFSET_SCALE: f64 = 0.1;
const QUIET_NOISE_RATIO: f64 = 0.1;
const BOILERPLATE_POOL: usize = 8;
const BOILERPLATE_RATE: f64 = 0.3;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthetic corpus configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    #[default]
    Rotation,
    Affine,
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Transform::Rotation => "rotation",
            Transform::Affine => "affine",
        })
    }
}

impl FromStr for Transform {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rotation" => Ok(Transform::Rotation),
            "affine" => Ok(Transform::Affine),
            _ => Err(format!("unknown transform {s:?} (valid: rotation, affine)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    /// Documents per side.
    pub docs: usize,
    /// Mean sentences per document (at least 1).
    pub sentences_per_doc: f64,
    pub dim: usize,
    pub noise: f64,
    pub transform: Transform,
    pub seed: u64,
    /// Parallel sentence pairs for metric training.
    pub pairs: usize,
    /// Publication dates are spread uniformly over this many days.
    pub days: u32,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            docs: 200,
            sentences_per_doc: 6.0,
            dim: 16,
            noise: 0.0,
            transform: Transform::Rotation,
            seed: 0,
            pairs: 5000,
            days: 1,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        if self.docs < 2 {
            return bad(format!("need at least 2 documents, got {}", self.docs));
        }
        if self.dim < 2 {
            return bad(format!("need dim >= 2, got {}", self.dim));
        }
        if !(self.sentences_per_doc >= 1.0 && self.sentences_per_doc.is_finite()) {
            return bad(format!("sentences per document must be >= 1, got {}", self.sentences_per_doc));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad(format!("noise must be a non-negative number, got {}", self.noise));
        }
        if self.pairs < 2 {
            return bad(format!("need at least 2 parallel pairs, got {}", self.pairs));
        }
        if self.days == 0 {
            return bad("days must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub src_emb: EmbeddingMatrix,
    pub tgt_emb: EmbeddingMatrix,
    pub src_docs: Vec<Document>,
    pub tgt_docs: Vec<Document>,
    pub gold: GoldAlignment,
    pub pairs: ParallelPairSet,
}

/// File names written by [`SynthCorpus::write`].
pub const SYNTH_FILES: [&str; 6] = ["src.emb", "tgt.emb", "src.jsonl", "tgt.jsonl", "gold.tsv", "pairs.tsv"];

impl SynthCorpus {
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, SynthError> {
        let dir = dir.as_ref();
        let paths: Vec<PathBuf> = SYNTH_FILES.iter().map(|f| dir.join(f)).collect();
        write_embedding_matrix(&self.src_emb, &paths[0])?;
        write_embedding_matrix(&self.tgt_emb, &paths[1])?;
        write_manifest(&self.src_docs, &paths[2])?;
        write_manifest(&self.tgt_docs, &paths[3])?;
        write_doc_pairs(self.gold.pairs(), Some("src_id\ttgt_id"), &paths[4])?;
        write_pairs(&self.pairs, &paths[5])?;
        Ok(paths)
    }
}

/// The fixed source-to-target map.
struct Channel {
    map: DMatrix<f64>,
    offset: DVector<f64>,
    /// Noise is `noise_basis * diag(noise_sd) * z` for standard normal `z`.
    noise_basis: DMatrix<f64>,
    noise_sd: DVector<f64>,
}

impl Channel {
    fn new(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Self {
        let d = cfg.dim;
        let rotation = small_rotation(d, rng);
        match cfg.transform {
            Transform::Rotation => Self {
                map: rotation,
                offset: DVector::zeros(d),
                noise_basis: DMatrix::identity(d, d),
                noise_sd: DVector::from_element(d, cfg.noise),
            },
            Transform::Affine => {
                let loud = (d / 2).max(1);
                let basis = random_orthogonal(d, rng);
                let gain = DVector::from_fn(d, |i, _| if i < loud { NUISANCE_GAIN } else { 1.0 });
                let noise_sd = DVector::from_fn(d, |i, _| {
                    if i < loud {
                        cfg.noise
                    } else {
                        cfg.noise * QUIET_NOISE_RATIO
                    }
                });
                let offset = DVector::from_fn(d, |_, _| OFFSET_SCALE * normal(rng));
                Self {
                    map: rotation * &basis * DMatrix::from_diagonal(&gain) * basis.transpose(),
                    offset,
                    noise_basis: basis,
                    noise_sd,
                }
            }
        }
    }

    fn apply(&self, x: &DVector<f64>, rng: &mut ChaCha8Rng) -> DVector<f64> {
        let z = DVector::from_fn(x.len(), |i, _| self.noise_sd[i] * normal(rng));
        &self.map * x + &self.offset + &self.noise_basis * z
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Cayley transform `(I - S)(I + S)⁻¹` of a small random skew matrix `S`.
fn small_rotation(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in (i + 1)..d {
            let v = ROTATION_SCALE * normal(rng);
            s[(i, j)] = v;
            s[(j, i)] = -v;
        }
    }
    let id = DMatrix::identity(d, d);
    let inv = (&id + &s).try_inverse().expect("I + S is invertible for skew S");
    (id - s) * inv
}

fn random_orthogonal(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| normal(rng));
    g.qr().q()
}

/// Collects source/target rows as they are generated.
struct Rows {
    dim: usize,
    src: Vec<f32>,
    tgt: Vec<f32>,
}

impl Rows {
    fn push(&mut self, x: &DVector<f64>, y: &DVector<f64>) -> usize {
        let row = self.src.len() / self.dim;
        self.src.extend(x.iter().map(|&v| v as f32));
        self.tgt.extend(y.iter().map(|&v| v as f32));
        row
    }
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthCorpus, SynthError> {
    cfg.validate()?;
    let d = cfg.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let channel = Channel::new(cfg, &mut rng);
    let mut rows = Rows {
        dim: d,
        src: Vec::new(),
        tgt: Vec::new(),
    };
    let sample_pair = |rng: &mut ChaCha8Rng, rows: &mut Rows| {
        let x = DVector::from_fn(d, |_, _| normal(rng));
        let y = channel.apply(&x, rng);
        rows.push(&x, &y)
    };

    // Boilerplate rows are shared by every document that uses them.
    let boilerplate: Vec<usize> = (0..BOILERPLATE_POOL).map(|_| sample_pair(&mut rng, &mut rows)).collect();

    let extra = Poisson::new(cfg.sentences_per_doc - 1.0).ok();
    let base = NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid date");
    let mut src_docs = Vec::with_capacity(cfg.docs);
    let mut tgt_docs = Vec::with_capacity(cfg.docs);
    for i in 0..cfg.docs {
        let n = 1 + extra.map_or(0, |p| p.sample(&mut rng) as usize);
        let date = base.checked_add_days(Days::new(rng.random_range(0..cfg.days) as u64));
        let mut s_sent = Vec::with_capacity(n + 1);
        let mut t_sent = Vec::with_capacity(n + 1);
        for _ in 0..n {
            let row = sample_pair(&mut rng, &mut rows);
            let tokens: u32 = rng.random_range(5..40);
            let t_tokens = ((tokens as f64) * rng.random_range(0.8..1.25)).round().max(1.0) as u32;
            s_sent.push(SentenceRef::new(row, tokens));
            t_sent.push(SentenceRef::new(row, t_tokens));
        }
        if rng.random_bool(BOILERPLATE_RATE) {
            let k = rng.random_range(0..BOILERPLATE_POOL);
            let key = Some(format!("boilerplate-{k}"));
            let pos = rng.random_range(0..=n);
            let tokens = 4 + k as u32;
            s_sent.insert(pos, SentenceRef { content_key: key.clone(), ..SentenceRef::new(boilerplate[k], tokens) });
            t_sent.insert(pos, SentenceRef { content_key: key, ..SentenceRef::new(boilerplate[k], tokens) });
        }
        src_docs.push(Document {
            doc_id: format!("s{i:05}"),
            lang: "src".into(),
            date,
            sentences: s_sent,
        });
        tgt_docs.push(Document {
            doc_id: format!("t{i:05}"),
            lang: "tgt".into(),
            date,
            sentences: t_sent,
        });
    }
    let gold = GoldAlignment::new(src_docs.iter().zip(&tgt_docs).map(|(s, t)| (s.doc_id.clone(), t.doc_id.clone())))?;
    tgt_docs.shuffle(&mut rng);

    let pair_rows: Vec<(usize, usize)> = (0..cfg.pairs)
        .map(|_| {
            let r = sample_pair(&mut rng, &mut rows);
            (r, r)
        })
        .collect();

    Ok(SynthCorpus {
        src_emb: EmbeddingMatrix::new(d, rows.src)?,
        tgt_emb: EmbeddingMatrix::new(d, rows.tgt)?,
        src_docs,
        tgt_docs,
        gold,
        pairs: ParallelPairSet::new(pair_rows)?,
    })
}
