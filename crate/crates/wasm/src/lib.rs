//! Browser bindings for the interactive demo in `www/`.
//!
//! Each export takes and returns a JSON string and wraps a plain Rust
//! function ([`flow`], [`learn`], [`weigh_text`]) that native tests call.

use std::collections::{BTreeMap, HashMap};

use gmdalign_core::corpus::{Document, SentenceRef};
use gmdalign_core::gmd::{exact_emd, greedy_transport, CostMatrix, Move, EXACT_EMD_MAX_CELLS};
use gmdalign_core::learners::{
    itml::train_itml, sdml::train_sdml, ItmlConfig, Label, PairConstraint, SdmlConfig, TrainedMetric,
};
use gmdalign_core::metric::{Algorithm, MahalanobisMetric, MetricKind, Provenance};
use gmdalign_core::weighting::{build_idf_table, weigh, WeightingScheme};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

#[derive(Debug, Clone, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    #[serde(default = "unit")]
    pub w: f64,
}

fn unit() -> f64 {
    1.0
}

/// `euclidean`, `cosine`, or a row-major 2x2 PSD matrix.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum MetricSpec {
    Named(String),
    Matrix { matrix: [f64; 4] },
}

#[derive(Debug, Deserialize)]
pub struct FlowInput {
    pub source: Vec<Point>,
    pub target: Vec<Point>,
    pub metric: MetricSpec,
}

#[derive(Debug, Serialize)]
pub struct FlowOutput {
    pub gmd: f64,
    /// Absent when the instance is too large for the exact solver.
    pub exact: Option<f64>,
    pub moves: Vec<Move>,
}

fn metric_kind(spec: &MetricSpec) -> Result<MetricKind, String> {
    match spec {
        MetricSpec::Named(n) if n == "euclidean" => Ok(MetricKind::Euclidean),
        MetricSpec::Named(n) if n == "cosine" => Ok(MetricKind::CosineDistance),
        MetricSpec::Named(n) => Err(format!("unknown metric {n:?}")),
        MetricSpec::Matrix { matrix } => {
            let prov = Provenance {
                algorithm: Algorithm::Itml,
                trained_pairs: 0,
                seed: 0,
            };
            MahalanobisMetric::new(DMatrix::from_row_slice(2, 2, matrix), prov)
                .map(MetricKind::Mahalanobis)
                .map_err(|e| e.to_string())
        }
    }
}

fn normalized(points: &[Point], side: &str) -> Result<Vec<f64>, String> {
    if points.is_empty() {
        return Err(format!("{side} has no points"));
    }
    if points.iter().any(|p| !(p.w > 0.0) || !p.w.is_finite()) {
        return Err(format!("{side} weights must be positive"));
    }
    let total: f64 = points.iter().map(|p| p.w).sum();
    Ok(points.iter().map(|p| p.w / total).collect())
}

/// Greedy flow between two weighted 2-D point sets, with the exact EMD for
/// comparison when the instance is small.
pub fn flow(input: &FlowInput) -> Result<FlowOutput, String> {
    let metric = metric_kind(&input.metric)?;
    let a = normalized(&input.source, "source")?;
    let b = normalized(&input.target, "target")?;
    let cost = CostMatrix::try_from_fn(a.len(), b.len(), |i, j| {
        let (p, q) = (&input.source[i], &input.target[j]);
        metric.distance(&[p.x, p.y], &[q.x, q.y])
    })
    .map_err(|e| e.to_string())?;
    let trace = greedy_transport(&a, &b, &cost).map_err(|e| e.to_string())?;
    let exact = if a.len() * b.len() <= EXACT_EMD_MAX_CELLS {
        Some(exact_emd(&a, &b, &cost).map_err(|e| e.to_string())?)
    } else {
        None
    };
    Ok(FlowOutput {
        gmd: trace.total_cost,
        exact,
        moves: trace.moves,
    })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default)]
pub struct LearnInput {
    pub algo: String,
    /// Similar pairs; the same number of dissimilar pairs is added.
    pub pairs: usize,
    /// Direction (radians) along which similar pairs vary the most.
    pub angle: f64,
    /// Spread of similar pairs along `angle`.
    pub spread: f64,
    /// Spread of similar pairs across `angle`.
    pub noise: f64,
    pub seed: u64,
    pub gamma: f64,
    pub sparsity: f64,
    pub balance: f64,
}

impl Default for LearnInput {
    fn default() -> Self {
        Self {
            algo: "itml".into(),
            pairs: 60,
            angle: 0.5,
            spread: 1.5,
            noise: 0.15,
            seed: 1,
            gamma: 1.0,
            sparsity: 0.01,
            balance: 0.1,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Constraint {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub similar: bool,
}

#[derive(Debug, Serialize)]
pub struct Ellipse {
    /// Semi-axes of `{v : vᵀMv = 1}`; infinite along a null direction.
    pub radii: [f64; 2],
    /// Angle (radians) of the first semi-axis.
    pub angle: f64,
}

#[derive(Debug, Serialize)]
pub struct LearnOutput {
    pub matrix: [f64; 4],
    pub ellipse: Ellipse,
    pub iterations: usize,
    pub converged: bool,
    pub satisfaction_before: f64,
    pub satisfaction_after: f64,
    pub constraints: Vec<Constraint>,
}

/// Similar pairs vary along `angle`; dissimilar pairs are pushed 1.5 to 3
/// units across it.
pub fn constraints_2d(cfg: &LearnInput) -> Vec<PairConstraint> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (c, s) = (cfg.angle.cos(), cfg.angle.sin());
    let rotate = |u: f64, v: f64| DVector::from_vec(vec![c * u - s * v, s * u + c * v]);
    let mut out = Vec::with_capacity(2 * cfg.pairs);
    for _ in 0..cfg.pairs {
        let x = DVector::from_fn(2, |_, _| rng.random_range(-3.0..3.0));
        let along: f64 = StandardNormal.sample(&mut rng);
        let across: f64 = StandardNormal.sample(&mut rng);
        let y = &x + rotate(along * cfg.spread, across * cfg.noise);
        out.push(PairConstraint { x, y, label: Label::Similar });

        let x = DVector::from_fn(2, |_, _| rng.random_range(-3.0..3.0));
        let along: f64 = StandardNormal.sample(&mut rng);
        let offset = rng.random_range(1.5..3.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let y = &x + rotate(along * cfg.spread, offset);
        out.push(PairConstraint {
            x,
            y,
            label: Label::Dissimilar,
        });
    }
    out
}

fn ellipse(m: &DMatrix<f64>) -> Ellipse {
    let eig = SymmetricEigen::new(m.clone());
    let radius = |l: f64| if l > 1e-12 { 1.0 / l.sqrt() } else { f64::INFINITY };
    let v = eig.eigenvectors.column(0);
    Ellipse {
        radii: [radius(eig.eigenvalues[0]), radius(eig.eigenvalues[1])],
        angle: v[1].atan2(v[0]),
    }
}

pub fn learn(cfg: &LearnInput) -> Result<LearnOutput, String> {
    if cfg.pairs < 2 || cfg.pairs > 2000 {
        return Err("pairs must be in 2..=2000".into());
    }
    let cs = constraints_2d(cfg);
    let trained: TrainedMetric = match cfg.algo.as_str() {
        "itml" => train_itml(
            &cs,
            &ItmlConfig {
                gamma: cfg.gamma,
                seed: cfg.seed,
                ..Default::default()
            },
        ),
        "sdml" => train_sdml(
            &cs,
            &SdmlConfig {
                sparsity_param: cfg.sparsity,
                balance_param: cfg.balance,
                seed: cfg.seed,
                ..Default::default()
            },
        ),
        other => return Err(format!("unknown algorithm {other:?} (valid: itml, sdml)")),
    }
    .map_err(|e| e.to_string())?;
    let m = trained.metric.matrix();
    Ok(LearnOutput {
        matrix: [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]],
        ellipse: ellipse(m),
        iterations: trained.report.iterations,
        converged: trained.report.converged,
        satisfaction_before: trained.report.satisfaction_before,
        satisfaction_after: trained.report.satisfaction_after,
        constraints: cs
            .iter()
            .map(|c| Constraint {
                x: [c.x[0], c.x[1]],
                y: [c.y[0], c.y[1]],
                similar: c.label == Label::Similar,
            })
            .collect(),
    })
}

#[derive(Debug, Deserialize)]
pub struct TextDocument {
    pub id: String,
    pub sentences: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct SentenceWeights {
    pub text: String,
    pub tokens: u32,
    pub count: u32,
    pub doc_freq: usize,
    pub weights: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize)]
pub struct DocumentWeights {
    pub id: String,
    pub sentences: Vec<SentenceWeights>,
}

fn key(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Weights under every scheme for documents given as plain sentences.
/// Repeated sentences within a document are merged into one entry with an
/// occurrence count; sentences match across documents after whitespace and
/// case normalization.
pub fn weigh_text(docs: &[TextDocument]) -> Result<Vec<DocumentWeights>, String> {
    let mut row = 0;
    let mut parsed = Vec::with_capacity(docs.len());
    let mut texts = Vec::with_capacity(docs.len());
    for d in docs {
        let mut order: Vec<String> = Vec::new();
        let mut merged: HashMap<String, (usize, SentenceRef)> = HashMap::new();
        for s in d.sentences.iter().map(|s| s.trim()).filter(|s| !s.is_empty()) {
            let k = key(s);
            if let Some((_, r)) = merged.get_mut(&k) {
                r.occurrence_count += 1;
                continue;
            }
            let tokens = s.split_whitespace().count() as u32;
            let mut r = SentenceRef::new(row, tokens);
            r.content_key = Some(k.clone());
            row += 1;
            merged.insert(k.clone(), (order.len(), r));
            order.push(s.to_owned());
        }
        if order.is_empty() {
            return Err(format!("document {:?} has no sentences", d.id));
        }
        let mut refs: Vec<(usize, SentenceRef)> = merged.into_values().collect();
        refs.sort_by_key(|(i, _)| *i);
        parsed.push(Document {
            doc_id: d.id.clone(),
            lang: "xx".into(),
            date: None,
            sentences: refs.into_iter().map(|(_, r)| r).collect(),
        });
        texts.push(order);
    }

    let table = build_idf_table(&parsed);
    let mut out = Vec::with_capacity(parsed.len());
    for (doc, text) in parsed.iter().zip(texts) {
        let mut per: Vec<BTreeMap<String, f64>> = vec![BTreeMap::new(); doc.sentences.len()];
        for scheme in WeightingScheme::ALL {
            let w = weigh(doc, scheme, &table).map_err(|e| e.to_string())?;
            for (slot, &x) in per.iter_mut().zip(w.weights()) {
                slot.insert(scheme.to_string(), x);
            }
        }
        out.push(DocumentWeights {
            id: doc.doc_id.clone(),
            sentences: doc
                .sentences
                .iter()
                .zip(text)
                .zip(per)
                .map(|((s, text), weights)| SentenceWeights {
                    text,
                    tokens: s.token_count,
                    count: s.occurrence_count,
                    doc_freq: table.doc_freq(s),
                    weights,
                })
                .collect(),
        });
    }
    Ok(out)
}

fn js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string()))
        .map_err(|e| JsValue::from_str(&e))
}

fn parse<'a, T: Deserialize<'a>>(s: &'a str) -> Result<T, String> {
    serde_json::from_str(s).map_err(|e| format!("bad input: {e}"))
}

#[wasm_bindgen(js_name = gmdFlow)]
pub fn gmd_flow(input: &str) -> Result<String, JsValue> {
    js(parse(input).and_then(|i| flow(&i)))
}

#[wasm_bindgen(js_name = learnMetric)]
pub fn learn_metric(input: &str) -> Result<String, JsValue> {
    js(parse(input).and_then(|i| learn(&i)))
}

#[wasm_bindgen(js_name = weighDocuments)]
pub fn weigh_documents(input: &str) -> Result<String, JsValue> {
    js(parse::<Vec<TextDocument>>(input).and_then(|d| weigh_text(&d)))
}
