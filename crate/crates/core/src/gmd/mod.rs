//! Greedy Movers Distance.
//!
//! Both documents are normalized bags of sentences. All sentence pairs are
//! sorted by distance and scanned cheapest first; each pair moves
//! `min(remaining mass of source sentence, remaining mass of target sentence)`
//! and contributes `distance * flow` to the cost. The scan stops once all
//! mass has moved. The result is an upper bound on the exact Earth Mover's
//! Distance, which [`exact_emd`] computes for small instances.

mod exact;

pub use exact::{exact_emd, exact_transport_plan, EXACT_EMD_MAX_CELLS};

use serde::Serialize;
use thiserror::Error;

use crate::corpus::EmbeddingMatrix;
use crate::metric::{MetricError, MetricKind};
use crate::weighting::WeightedDocument;

/// Largest tolerated difference between the two total masses.
pub const MASS_MISMATCH_TOLERANCE: f64 = 1e-6;
/// Residual mass below which the scan is considered complete.
pub const RESIDUAL_MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GmdError {
    #[error("total masses differ: {source_mass} vs {target_mass}")]
    MassMismatch { source_mass: f64, target_mass: f64 },
    #[error("embedding dimensions differ: {source_dim} vs {target_dim}")]
    DimensionMismatch { source_dim: usize, target_dim: usize },
    #[error("cost matrix is {rows}x{cols} but weights are {a}x{b}")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        a: usize,
        b: usize,
    },
    #[error("empty mass distribution")]
    EmptyDistribution,
    #[error("weights must be finite and non-negative")]
    InvalidWeight,
    #[error("cost matrix entry ({row}, {col}) is not finite")]
    InvalidCost { row: usize, col: usize },
    #[error("exact EMD oracle limited to {max} cells, got {rows}x{cols}")]
    TooLarge { rows: usize, cols: usize, max: usize },
    #[error("exact EMD did not terminate")]
    NoConvergence,
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Dense row-major ground-cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "cost matrix data length");
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn try_from_fn<E>(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> Result<f64, E>,
    ) -> Result<Self, E> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j)?);
            }
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Move {
    pub source: usize,
    pub target: usize,
    pub flow: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowTrace {
    pub moves: Vec<Move>,
    pub total_cost: f64,
}

pub(crate) fn validate(a: &[f64], b: &[f64], cost: &CostMatrix) -> Result<(f64, f64), GmdError> {
    if a.is_empty() || b.is_empty() {
        return Err(GmdError::EmptyDistribution);
    }
    if cost.rows != a.len() || cost.cols != b.len() {
        return Err(GmdError::ShapeMismatch {
            rows: cost.rows,
            cols: cost.cols,
            a: a.len(),
            b: b.len(),
        });
    }
    if a.iter().chain(b).any(|w| !w.is_finite() || *w < 0.0) {
        return Err(GmdError::InvalidWeight);
    }
    if let Some(k) = cost.data.iter().position(|c| !c.is_finite()) {
        return Err(GmdError::InvalidCost {
            row: k / cost.cols,
            col: k % cost.cols,
        });
    }
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    if (sa - sb).abs() > MASS_MISMATCH_TOLERANCE {
        return Err(GmdError::MassMismatch {
            source_mass: sa,
            target_mass: sb,
        });
    }
    Ok((sa, sb))
}

/// Greedy transport of mass `a` onto mass `b` under `cost`.
///
/// Pairs are visited by ascending cost; equal costs are ordered by the
/// canonical `(min(i, j), max(i, j))` index pair and then by source index.
pub fn greedy_transport(a: &[f64], b: &[f64], cost: &CostMatrix) -> Result<FlowTrace, GmdError> {
    let (sa, sb) = validate(a, b, cost)?;
    let mut order: Vec<(usize, usize)> = (0..a.len())
        .flat_map(|i| (0..b.len()).map(move |j| (i, j)))
        .collect();
    order.sort_unstable_by(|&(i, j), &(k, l)| {
        cost.get(i, j)
            .total_cmp(&cost.get(k, l))
            .then_with(|| (i.min(j), i.max(j)).cmp(&(k.min(l), k.max(l))))
            .then_with(|| i.cmp(&k))
    });

    let goal = sa.min(sb) - RESIDUAL_MASS_TOLERANCE;
    let mut left_a = a.to_vec();
    let mut left_b = b.to_vec();
    let mut moved = 0.0;
    let mut total_cost = 0.0;
    let mut moves = Vec::new();
    for (i, j) in order {
        if moved >= goal {
            break;
        }
        let flow = left_a[i].min(left_b[j]);
        if flow > 0.0 {
            let distance = cost.get(i, j);
            total_cost += distance * flow;
            left_a[i] -= flow;
            left_b[j] -= flow;
            moved += flow;
            moves.push(Move {
                source: i,
                target: j,
                flow,
                distance,
            });
        }
    }
    Ok(FlowTrace { moves, total_cost })
}

/// Pairwise sentence distances between two documents.
pub fn sentence_costs(
    a: &WeightedDocument<'_>,
    b: &WeightedDocument<'_>,
    metric: &MetricKind,
    a_emb: &EmbeddingMatrix,
    b_emb: &EmbeddingMatrix,
) -> Result<CostMatrix, GmdError> {
    if a_emb.dim() != b_emb.dim() {
        return Err(GmdError::DimensionMismatch {
            source_dim: a_emb.dim(),
            target_dim: b_emb.dim(),
        });
    }
    metric.check_dim(a_emb.dim())?;
    let sa = &a.doc.sentences;
    let sb = &b.doc.sentences;
    Ok(CostMatrix::try_from_fn(sa.len(), sb.len(), |i, j| {
        metric.distance(a_emb.row(sa[i].emb_row), b_emb.row(sb[j].emb_row))
    })?)
}

/// GMD between two weighted documents whose sentences live in `a_emb` and
/// `b_emb` respectively.
pub fn greedy_movers_distance(
    a: &WeightedDocument<'_>,
    b: &WeightedDocument<'_>,
    metric: &MetricKind,
    a_emb: &EmbeddingMatrix,
    b_emb: &EmbeddingMatrix,
) -> Result<(f64, FlowTrace), GmdError> {
    let cost = sentence_costs(a, b, metric, a_emb, b_emb)?;
    let trace = greedy_transport(a.weights(), b.weights(), &cost)?;
    Ok((trace.total_cost, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, SentenceRef};
    use crate::weighting::weight_uniform;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn example() -> (Vec<f64>, Vec<f64>, CostMatrix) {
        (
            vec![0.6, 0.4],
            vec![0.5, 0.5],
            CostMatrix::new(2, 2, vec![1.0, 2.0, 3.0, 1.0]),
        )
    }

    #[test]
    fn hand_traced_two_by_two() {
        let (a, b, c) = example();
        let t = greedy_transport(&a, &b, &c).unwrap();
        assert!((t.total_cost - 1.1).abs() < 1e-12);
        let got: Vec<(usize, usize, f64)> = t.moves.iter().map(|m| (m.source, m.target, m.flow)).collect();
        assert_eq!(got.len(), 3);
        assert_eq!((got[0].0, got[0].1), (0, 0));
        assert!((got[0].2 - 0.5).abs() < 1e-12);
        assert_eq!((got[1].0, got[1].1), (1, 1));
        assert!((got[1].2 - 0.4).abs() < 1e-12);
        assert_eq!((got[2].0, got[2].1), (0, 1));
        assert!((got[2].2 - 0.1).abs() < 1e-12);
    }

    #[test]
    fn single_sentence_documents() {
        let t = greedy_transport(&[1.0], &[1.0], &CostMatrix::new(1, 1, vec![2.5])).unwrap();
        assert_eq!(t.total_cost, 2.5);
        assert_eq!(t.moves.len(), 1);
        assert_eq!(t.moves[0].flow, 1.0);
    }

    #[test]
    fn mass_mismatch_and_shape_errors() {
        let c = CostMatrix::new(1, 1, vec![1.0]);
        assert!(matches!(
            greedy_transport(&[1.0], &[0.9], &c),
            Err(GmdError::MassMismatch { .. })
        ));
        assert!(matches!(
            greedy_transport(&[0.5, 0.5], &[1.0], &c),
            Err(GmdError::ShapeMismatch { .. })
        ));
        assert!(matches!(
            greedy_transport(&[1.0], &[1.0], &CostMatrix::new(1, 1, vec![f64::NAN])),
            Err(GmdError::InvalidCost { row: 0, col: 0 })
        ));
        assert!(matches!(
            greedy_transport(&[], &[], &CostMatrix::new(0, 0, vec![])),
            Err(GmdError::EmptyDistribution)
        ));
    }

    fn doc(rows: &[usize]) -> Document {
        Document {
            doc_id: "d".into(),
            lang: "x".into(),
            date: None,
            sentences: rows.iter().map(|&r| SentenceRef::new(r, 1)).collect(),
        }
    }

    #[test]
    fn identical_documents_cost_zero() {
        let emb = EmbeddingMatrix::new(2, vec![0.0, 1.0, 3.0, -1.0, 2.0, 2.0]).unwrap();
        let d = doc(&[0, 1, 2]);
        let w = weight_uniform(&d);
        let (cost, trace) =
            greedy_movers_distance(&w, &w, &MetricKind::Euclidean, &emb, &emb).unwrap();
        assert_eq!(cost, 0.0);
        let moved: f64 = trace.moves.iter().map(|m| m.flow).sum();
        assert!((moved - 1.0).abs() < 1e-9);
    }

    #[test]
    fn dimension_mismatch_between_matrices() {
        let e2 = EmbeddingMatrix::new(2, vec![0.0, 1.0]).unwrap();
        let e3 = EmbeddingMatrix::new(3, vec![0.0, 1.0, 2.0]).unwrap();
        let d = doc(&[0]);
        let w = weight_uniform(&d);
        assert!(matches!(
            greedy_movers_distance(&w, &w, &MetricKind::Euclidean, &e2, &e3),
            Err(GmdError::DimensionMismatch { .. })
        ));
    }

    fn random_simplex(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
        let s: f64 = raw.iter().sum();
        raw.into_iter().map(|r| r / s).collect()
    }

    #[test]
    fn symmetry_and_conservation_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let (m, n) = (rng.random_range(1..9), rng.random_range(1..9));
            let a = random_simplex(m, &mut rng);
            let b = random_simplex(n, &mut rng);
            let c = CostMatrix::from_fn(m, n, |_, _| rng.random_range(0.0..5.0));
            let ab = greedy_transport(&a, &b, &c).unwrap();
            let ba = greedy_transport(&b, &a, &c.transpose()).unwrap();
            assert_eq!(ab.total_cost.to_bits(), ba.total_cost.to_bits());

            let moved: f64 = ab.moves.iter().map(|mv| mv.flow).sum();
            assert!((moved - 1.0).abs() <= 1e-9);
            let mut out = vec![0.0; m];
            let mut inn = vec![0.0; n];
            let mut recomputed = 0.0;
            for mv in &ab.moves {
                out[mv.source] += mv.flow;
                inn[mv.target] += mv.flow;
                recomputed += mv.flow * mv.distance;
            }
            assert!(out.iter().zip(&a).all(|(o, w)| *o <= w + 1e-9));
            assert!(inn.iter().zip(&b).all(|(o, w)| *o <= w + 1e-9));
            assert!((recomputed - ab.total_cost).abs() <= 1e-9);
        }
    }

    #[test]
    fn identity_mahalanobis_matches_euclidean_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let data: Vec<f32> = (0..40).map(|_| rng.random_range(-1.0..1.0)).collect();
        let emb = EmbeddingMatrix::new(4, data).unwrap();
        let da = doc(&[0, 1, 2, 3]);
        let db = doc(&[4, 5, 6, 7, 8, 9]);
        let (wa, wb) = (weight_uniform(&da), weight_uniform(&db));
        let id = MetricKind::Mahalanobis(crate::metric::MahalanobisMetric::identity(4));
        let (x, tx) = greedy_movers_distance(&wa, &wb, &MetricKind::Euclidean, &emb, &emb).unwrap();
        let (y, ty) = greedy_movers_distance(&wa, &wb, &id, &emb, &emb).unwrap();
        assert_eq!(x.to_bits(), y.to_bits());
        assert_eq!(tx, ty);
    }
}
