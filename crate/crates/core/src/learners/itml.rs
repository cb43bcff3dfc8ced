//! Information-theoretic metric learning.
//!
//! Cyclic Bregman projections: each constraint `c` with difference vector
//! `v` and sign `δ` (+1 similar, -1 dissimilar) is projected in turn,
//!
//! ```text
//! p     = vᵀ A v
//! α     = min(λ_c, δ γ/(γ+1) (1/p - 1/ξ_c))
//! β     = δ α / (1 - δ α p)
//! 1/ξ_c ← 1/ξ_c + δ α / γ
//! λ_c   ← λ_c - α
//! A     ← A + β (A v)(A v)ᵀ
//! ```
//!
//! Every projection is exact coordinate ascent on the dual, so the negated
//! dual `log det A - log det A0 + γ Σ log(ξ_c / ξ0_c)` never increases. It is
//! recorded once per sweep in [`TrainingReport::objective`].

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    check_constraints, percentile_bounds, prior_matrix, satisfaction, LearnError, PairConstraint, Prior,
    TrainedMetric, TrainingReport,
};
use crate::linalg;
use crate::metric::{Algorithm, MahalanobisMetric, Provenance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ItmlConfig {
    /// Slack trade-off; larger values enforce constraints more strictly.
    pub gamma: f64,
    pub max_iter: usize,
    /// Stop once the mean absolute change of the multipliers over a sweep
    /// drops to this value.
    pub tol: f64,
    pub u_percentile: f64,
    pub l_percentile: f64,
    pub prior: Prior,
    /// Shuffles the projection order.
    pub seed: u64,
}

impl Default for ItmlConfig {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            max_iter: 1000,
            tol: 1e-3,
            u_percentile: 5.0,
            l_percentile: 95.0,
            prior: Prior::Identity,
            seed: 0,
        }
    }
}

impl ItmlConfig {
    fn validate(&self) -> Result<(), LearnError> {
        let bad = |m: String| Err(LearnError::InvalidConfig(m));
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        let in_range = |p: f64| p > 0.0 && p < 100.0;
        if !in_range(self.u_percentile) || !in_range(self.l_percentile) || self.u_percentile >= self.l_percentile {
            return bad(format!(
                "need 0 < u_percentile < l_percentile < 100, got {} and {}",
                self.u_percentile, self.l_percentile
            ));
        }
        Ok(())
    }
}

pub fn train_itml(constraints: &[PairConstraint], cfg: &ItmlConfig) -> Result<TrainedMetric, LearnError> {
    cfg.validate()?;
    let (dim, similar, dissimilar) = check_constraints(constraints)?;
    let a0 = prior_matrix(cfg.prior, constraints, dim);

    let mut bounds = percentile_bounds(constraints, &a0, cfg.u_percentile, cfg.l_percentile);
    if !(bounds.lower > 0.0) {
        return Err(LearnError::DegenerateConstraints(
            "all constraint pairs are identical under the prior".into(),
        ));
    }
    if !(bounds.upper > 0.0) {
        let smallest = constraints
            .iter()
            .map(|c| super::quad_form(&a0, &c.diff()))
            .filter(|&d| d > 0.0)
            .fold(f64::INFINITY, f64::min);
        log::info!("similarity threshold is 0; raising it to the smallest positive distance {smallest:e}");
        bounds.upper = smallest;
    }

    let diffs: Vec<Vec<f64>> = constraints.iter().map(|c| c.diff().as_slice().to_vec()).collect();
    let signs: Vec<f64> = constraints.iter().map(|c| c.label.sign()).collect();
    let xi0: Vec<f64> = signs
        .iter()
        .map(|&s| if s > 0.0 { bounds.upper } else { bounds.lower })
        .collect();

    let mut order: Vec<usize> = (0..constraints.len())
        .filter(|&c| diffs[c].iter().any(|&x| x != 0.0))
        .collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));

    // Dense row-major copy of the working matrix; exactly symmetric throughout
    // because every update is a symmetric outer product.
    let mut a: Vec<f64> = a0.transpose().as_slice().to_vec();
    let mut lambda = vec![0.0f64; constraints.len()];
    let mut inv_xi: Vec<f64> = xi0.iter().map(|x| 1.0 / x).collect();
    let gamma_proj = cfg.gamma / (cfg.gamma + 1.0);
    let log_det0 = linalg::log_det_spd(&a0).unwrap_or(f64::NAN);

    let mut av = vec![0.0; dim];
    let mut objective = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        let mut change = 0.0;
        for &c in &order {
            let v = &diffs[c];
            let delta = signs[c];
            for (i, out) in av.iter_mut().enumerate() {
                let row = &a[i * dim..(i + 1) * dim];
                *out = row.iter().zip(v).map(|(x, y)| x * y).sum();
            }
            let p: f64 = av.iter().zip(v).map(|(x, y)| x * y).sum();
            if !(p > 0.0 && p.is_finite()) {
                continue;
            }
            let alpha = lambda[c].min(delta * gamma_proj * (1.0 / p - inv_xi[c]));
            let denom = 1.0 - delta * alpha * p;
            if !(denom > 0.0) || alpha == 0.0 {
                continue;
            }
            let beta = delta * alpha / denom;
            inv_xi[c] += delta * alpha / cfg.gamma;
            lambda[c] -= alpha;
            change += alpha.abs();
            for i in 0..dim {
                let s = beta * av[i];
                let row = &mut a[i * dim..(i + 1) * dim];
                for (x, w) in row.iter_mut().zip(&av) {
                    *x += s * w;
                }
            }
        }
        iterations += 1;

        let am = DMatrix::from_row_slice(dim, dim, &a);
        let slack: f64 = (0..constraints.len()).map(|c| (1.0 / (inv_xi[c] * xi0[c])).ln()).sum();
        let log_det = linalg::log_det_spd(&am).unwrap_or(f64::NAN);
        objective.push(log_det - log_det0 + cfg.gamma * slack);

        let mean_change = change / constraints.len() as f64;
        log::debug!("itml sweep {iterations}: mean multiplier change {mean_change:e}");
        if mean_change <= cfg.tol {
            converged = true;
            break;
        }
    }
    if !converged && cfg.max_iter > 0 {
        log::warn!("itml stopped at max_iter={} before reaching tol={}", cfg.max_iter, cfg.tol);
    }

    let learned = DMatrix::from_row_slice(dim, dim, &a);
    let report = TrainingReport {
        algorithm: Algorithm::Itml,
        constraints: constraints.len(),
        similar,
        dissimilar,
        iterations,
        converged,
        bounds,
        satisfaction_before: satisfaction(constraints, &a0, bounds),
        satisfaction_after: satisfaction(constraints, &learned, bounds),
        objective,
    };
    let metric = MahalanobisMetric::new(
        learned,
        Provenance {
            algorithm: Algorithm::Itml,
            trained_pairs: similar as u64,
            seed: cfg.seed,
        },
    )?;
    Ok(TrainedMetric { metric, report })
}
