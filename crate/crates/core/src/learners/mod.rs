//! Supervised Mahalanobis metric learning from a parallel corpus.
//!
//! A parallel corpus only supplies positive (translation) pairs, so
//! [`build_constraints`] adds negatives by pairing each source sentence with a
//! random non-aligned target sentence. Both learners consume the resulting
//! similar/dissimilar constraints:
//!
//! - [`itml`]: cyclic Bregman projections under a LogDet divergence to a prior.
//! - [`sdml`]: LogDet-regularized estimate with an L1 penalty on the
//!   off-diagonal entries, solved with the graphical lasso.

pub mod itml;
pub mod sdml;
#[cfg(test)]
mod testutil;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusError, EmbeddingMatrix, ParallelPairSet};
use crate::linalg;
use crate::metric::{MahalanobisMetric, MetricError};

pub use itml::ItmlConfig;
pub use sdml::SdmlConfig;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("at least 2 parallel pairs with distinct targets are needed for negative sampling (got {0})")]
    InsufficientPairs(usize),
    #[error("constraint {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("need at least one similar and one dissimilar constraint (got {similar} similar, {dissimilar} dissimilar)")]
    SingleClass { similar: usize, dissimilar: usize },
    #[error("degenerate constraints: {0}")]
    DegenerateConstraints(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no convergence after {iterations} iterations (last change {last_change:e})")]
    NonConvergence {
        iterations: usize,
        last_change: f64,
        last_iterate: Box<DMatrix<f64>>,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Similar,
    Dissimilar,
}

impl Label {
    /// `+1` for similar, `-1` for dissimilar.
    pub fn sign(self) -> f64 {
        match self {
            Label::Similar => 1.0,
            Label::Dissimilar => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairConstraint {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub label: Label,
}

impl PairConstraint {
    pub fn diff(&self) -> DVector<f64> {
        &self.x - &self.y
    }
}

/// Prior metric the learners regularize towards.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Prior {
    /// `M0 = I`: an untrained model is exactly Euclidean distance.
    #[default]
    Identity,
    /// `M0 = Σ⁻¹` for the sample covariance `Σ` of all constraint vectors.
    Covariance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegativeSamplingConfig {
    /// Dissimilar constraints per similar constraint.
    pub ratio: f64,
    pub seed: u64,
}

impl Default for NegativeSamplingConfig {
    fn default() -> Self {
        Self { ratio: 1.0, seed: 0 }
    }
}

/// Every parallel pair becomes a similar constraint; `ceil(ratio * |pairs|)`
/// dissimilar constraints pair source sentence `k mod |pairs|` with a
/// uniformly drawn target that is not its mate. Similar constraints come
/// first, in pair order.
pub fn build_constraints(
    pairs: &ParallelPairSet,
    src: &EmbeddingMatrix,
    tgt: &EmbeddingMatrix,
    cfg: &NegativeSamplingConfig,
) -> Result<Vec<PairConstraint>, LearnError> {
    if !(cfg.ratio > 0.0 && cfg.ratio.is_finite()) {
        return Err(LearnError::InvalidConfig(format!(
            "negative ratio must be positive, got {}",
            cfg.ratio
        )));
    }
    pairs.validate(src, tgt)?;
    if src.dim() != tgt.dim() {
        return Err(LearnError::DimensionMismatch {
            index: 0,
            expected: src.dim(),
            found: tgt.dim(),
        });
    }
    let p = pairs.pairs();
    let distinct_target = p.iter().any(|&(_, t)| t != p[0].1);
    if p.len() < 2 || !distinct_target {
        return Err(LearnError::InsufficientPairs(p.len()));
    }

    let vec_of = |m: &EmbeddingMatrix, row: usize| DVector::from_vec(m.row_f64(row));
    let mut out: Vec<PairConstraint> = p
        .iter()
        .map(|&(s, t)| PairConstraint {
            x: vec_of(src, s),
            y: vec_of(tgt, t),
            label: Label::Similar,
        })
        .collect();

    let count = (cfg.ratio * p.len() as f64).ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for k in 0..count {
        let (s, mate) = p[k % p.len()];
        let t = loop {
            let cand = p[rng.random_range(0..p.len())].1;
            if cand != mate {
                break cand;
            }
        };
        out.push(PairConstraint {
            x: vec_of(src, s),
            y: vec_of(tgt, t),
            label: Label::Dissimilar,
        });
    }
    Ok(out)
}

/// Checks shared preconditions and returns `(dim, similar, dissimilar)`.
pub(crate) fn check_constraints(constraints: &[PairConstraint]) -> Result<(usize, usize, usize), LearnError> {
    let dim = constraints.first().map(|c| c.x.len()).unwrap_or(0);
    for (index, c) in constraints.iter().enumerate() {
        for v in [&c.x, &c.y] {
            if v.len() != dim {
                return Err(LearnError::DimensionMismatch {
                    index,
                    expected: dim,
                    found: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(LearnError::DegenerateConstraints(format!(
                    "constraint {index} has non-finite components"
                )));
            }
        }
    }
    let similar = constraints.iter().filter(|c| c.label == Label::Similar).count();
    let dissimilar = constraints.len() - similar;
    if similar == 0 || dissimilar == 0 {
        return Err(LearnError::SingleClass { similar, dissimilar });
    }
    if dim == 0 {
        return Err(LearnError::DegenerateConstraints("zero-dimensional vectors".into()));
    }
    Ok((dim, similar, dissimilar))
}

/// Prior metric matrix `M0`.
pub(crate) fn prior_matrix(prior: Prior, constraints: &[PairConstraint], dim: usize) -> DMatrix<f64> {
    match prior {
        Prior::Identity => DMatrix::identity(dim, dim),
        Prior::Covariance => {
            let cov = linalg::covariance(
                constraints
                    .iter()
                    .flat_map(|c| [c.x.as_slice(), c.y.as_slice()]),
                dim,
            );
            let scale = cov.trace() / dim as f64;
            linalg::spd_inverse(&cov, 1e-10 * scale.max(1e-300))
        }
    }
}

pub(crate) fn quad_form(m: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    v.dot(&(m * v))
}

/// Similar/dissimilar squared-distance thresholds under a given matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bounds {
    /// Similar pairs should satisfy `d² <= upper`.
    pub upper: f64,
    /// Dissimilar pairs should satisfy `d² >= lower`.
    pub lower: f64,
}

/// Percentiles of squared distances under `m` over all constraint pairs.
pub fn percentile_bounds(
    constraints: &[PairConstraint],
    m: &DMatrix<f64>,
    u_percentile: f64,
    l_percentile: f64,
) -> Bounds {
    let mut d: Vec<f64> = constraints.iter().map(|c| quad_form(m, &c.diff())).collect();
    d.sort_by(f64::total_cmp);
    Bounds {
        upper: linalg::percentile(&d, u_percentile),
        lower: linalg::percentile(&d, l_percentile),
    }
}

/// Fraction of constraints satisfied under `m`: similar with `d² <= upper`
/// plus dissimilar with `d² >= lower`.
pub fn satisfaction(constraints: &[PairConstraint], m: &DMatrix<f64>, bounds: Bounds) -> f64 {
    if constraints.is_empty() {
        return 0.0;
    }
    let ok = constraints
        .iter()
        .filter(|c| {
            let d = quad_form(m, &c.diff());
            match c.label {
                Label::Similar => d <= bounds.upper,
                Label::Dissimilar => d >= bounds.lower,
            }
        })
        .count();
    ok as f64 / constraints.len() as f64
}

/// Summary of a training run, emitted as the CLI training log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingReport {
    pub algorithm: crate::metric::Algorithm,
    pub constraints: usize,
    pub similar: usize,
    pub dissimilar: usize,
    pub iterations: usize,
    pub converged: bool,
    pub bounds: Bounds,
    pub satisfaction_before: f64,
    pub satisfaction_after: f64,
    /// Per-sweep value of the tracked objective (ITML only).
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub objective: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedMetric {
    pub metric: MahalanobisMetric,
    pub report: TrainingReport,
}
