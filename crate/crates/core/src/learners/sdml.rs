//! Sparse metric learning via the graphical lasso.
//!
//! Minimizes `tr(M S) - log det M + λ Σ_{i≠j} |M_ij|` with
//! `S = M0⁻¹ + η K` and `K = Σ_c δ_c v_c v_cᵀ`. The minimizer is a sparse
//! inverse covariance estimate, found by block coordinate descent on
//! `W = M⁻¹`: each column of `W` is refit with a lasso regression against the
//! others. The diagonal is not penalized, so `W_ii = S_ii` throughout.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{
    check_constraints, percentile_bounds, prior_matrix, satisfaction, LearnError, PairConstraint, Prior,
    TrainedMetric, TrainingReport,
};
use crate::linalg;
use crate::metric::{Algorithm, MahalanobisMetric, Provenance};

/// Added to `|λ_min|` when shifting an indefinite `S`.
const PD_SHIFT: f64 = 1e-6;
const LASSO_MAX_ITER: usize = 1000;
const LASSO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdmlConfig {
    /// L1 weight on off-diagonal entries.
    pub sparsity_param: f64,
    /// Weight of the constraint term `K`.
    pub balance_param: f64,
    pub max_iter: usize,
    /// Relative mean change of the off-diagonal of `W` per sweep.
    pub tol: f64,
    pub prior: Prior,
    /// Recorded in the metric's provenance; the solver itself is deterministic.
    pub seed: u64,
}

impl Default for SdmlConfig {
    fn default() -> Self {
        Self {
            sparsity_param: 0.01,
            balance_param: 1e-3,
            max_iter: 200,
            tol: 1e-4,
            prior: Prior::Identity,
            seed: 0,
        }
    }
}

impl SdmlConfig {
    fn validate(&self) -> Result<(), LearnError> {
        let bad = |m: String| Err(LearnError::InvalidConfig(m));
        if !(self.sparsity_param >= 0.0 && self.sparsity_param.is_finite()) {
            return bad(format!("sparsity_param must be non-negative, got {}", self.sparsity_param));
        }
        if !(self.balance_param >= 0.0 && self.balance_param.is_finite()) {
            return bad(format!("balance_param must be non-negative, got {}", self.balance_param));
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        Ok(())
    }
}

/// Outcome of [`graphical_lasso`].
#[derive(Debug, Clone, PartialEq)]
pub struct GlassoFit {
    /// Precision estimate `Θ`.
    pub precision: DMatrix<f64>,
    /// Covariance estimate `W`.
    pub covariance: DMatrix<f64>,
    pub iterations: usize,
}

pub fn train_sdml(constraints: &[PairConstraint], cfg: &SdmlConfig) -> Result<TrainedMetric, LearnError> {
    cfg.validate()?;
    let (dim, similar, dissimilar) = check_constraints(constraints)?;
    let m0 = prior_matrix(cfg.prior, constraints, dim);

    let mut s = match cfg.prior {
        Prior::Identity => DMatrix::identity(dim, dim),
        Prior::Covariance => linalg::spd_inverse(&m0, 1e-300),
    };
    if cfg.balance_param > 0.0 {
        let mut k = DMatrix::zeros(dim, dim);
        for c in constraints {
            let v = c.diff();
            k.ger(c.label.sign(), &v, &v, 1.0);
        }
        s += k * cfg.balance_param;
    }
    let s = linalg::symmetrize(&s).0;
    let s = match s.clone().cholesky() {
        Some(_) => s,
        None => {
            let lmin = linalg::min_eigenvalue(&s);
            let shift = lmin.abs() + PD_SHIFT;
            log::info!("S is not positive definite (min eigenvalue {lmin:e}); shifting by {shift:e}");
            s + DMatrix::identity(dim, dim) * shift
        }
    };

    let fit = graphical_lasso(&s, cfg.sparsity_param, cfg.max_iter, cfg.tol)?;
    let learned = fit.precision;

    let bounds = percentile_bounds(constraints, &m0, 5.0, 95.0);
    let report = TrainingReport {
        algorithm: Algorithm::Sdml,
        constraints: constraints.len(),
        similar,
        dissimilar,
        iterations: fit.iterations,
        converged: true,
        bounds,
        satisfaction_before: satisfaction(constraints, &m0, bounds),
        satisfaction_after: satisfaction(constraints, &learned, bounds),
        objective: Vec::new(),
    };
    let metric = MahalanobisMetric::new(
        learned,
        Provenance {
            algorithm: Algorithm::Sdml,
            trained_pairs: similar as u64,
            seed: cfg.seed,
        },
    )?;
    Ok(TrainedMetric { metric, report })
}

/// `argmin_{Θ ≻ 0} tr(Θ S) - log det Θ + λ Σ_{i≠j} |Θ_ij|` for positive
/// definite `S`.
pub fn graphical_lasso(s: &DMatrix<f64>, lambda: f64, max_iter: usize, tol: f64) -> Result<GlassoFit, LearnError> {
    let p = s.nrows();
    let mut w = s.clone();
    // betas[j] holds the lasso coefficients of column j against the others.
    let mut betas: Vec<Vec<f64>> = vec![vec![0.0; p.saturating_sub(1)]; p];

    let off_scale = if p > 1 {
        let sum: f64 = (0..p)
            .flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| s[(i, j)].abs())
            .sum();
        (sum / (p * (p - 1)) as f64).max(1e-12)
    } else {
        1.0
    };

    if p == 1 {
        return Ok(GlassoFit {
            precision: DMatrix::from_element(1, 1, 1.0 / s[(0, 0)]),
            covariance: w,
            iterations: 0,
        });
    }

    let mut iterations = 0;
    let mut last_change = f64::INFINITY;
    loop {
        if iterations >= max_iter {
            return Err(LearnError::NonConvergence {
                iterations,
                last_change,
                last_iterate: Box::new(precision_from(&w, &betas)),
            });
        }
        iterations += 1;
        let mut change = 0.0;
        for j in 0..p {
            let others: Vec<usize> = (0..p).filter(|&k| k != j).collect();
            let beta = &mut betas[j];
            lasso_cd(&w, &others, |k| s[(others[k], j)], lambda, beta);
            for &i in &others {
                let new: f64 = others.iter().zip(beta.iter()).map(|(&k, b)| w[(i, k)] * b).sum();
                change += (new - w[(i, j)]).abs();
                w[(i, j)] = new;
                w[(j, i)] = new;
            }
        }
        last_change = change / (p * (p - 1)) as f64 / off_scale;
        log::debug!("glasso sweep {iterations}: relative change {last_change:e}");
        if last_change <= tol {
            break;
        }
    }
    // Refresh coefficients against the final W so Θ is consistent with it.
    for j in 0..p {
        let others: Vec<usize> = (0..p).filter(|&k| k != j).collect();
        lasso_cd(&w, &others, |k| s[(others[k], j)], lambda, &mut betas[j]);
    }
    Ok(GlassoFit {
        precision: precision_from(&w, &betas),
        covariance: w,
        iterations,
    })
}

/// Coordinate descent for `min ½ βᵀ W11 β - bᵀ β + λ |β|₁`, warm-started.
fn lasso_cd(w: &DMatrix<f64>, idx: &[usize], b: impl Fn(usize) -> f64, lambda: f64, beta: &mut [f64]) {
    let n = idx.len();
    for _ in 0..LASSO_MAX_ITER {
        let mut max_delta = 0.0f64;
        let mut max_beta = 0.0f64;
        for k in 0..n {
            let mut r = b(k);
            for l in 0..n {
                if l != k {
                    r -= w[(idx[k], idx[l])] * beta[l];
                }
            }
            let new = soft_threshold(r, lambda) / w[(idx[k], idx[k])];
            max_delta = max_delta.max((new - beta[k]).abs());
            beta[k] = new;
            max_beta = max_beta.max(new.abs());
        }
        if max_delta <= LASSO_TOL * max_beta.max(1.0) {
            break;
        }
    }
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Θ from the blockwise relations `θ_jj = 1 / (w_jj - w_12ᵀ β)`,
/// `θ_12 = -β θ_jj`, then symmetrized.
fn precision_from(w: &DMatrix<f64>, betas: &[Vec<f64>]) -> DMatrix<f64> {
    let p = w.nrows();
    let mut theta = DMatrix::zeros(p, p);
    for j in 0..p {
        let others: Vec<usize> = (0..p).filter(|&k| k != j).collect();
        let beta = &betas[j];
        let dot: f64 = others.iter().zip(beta).map(|(&k, b)| w[(k, j)] * b).sum();
        let tjj = 1.0 / (w[(j, j)] - dot);
        theta[(j, j)] = tjj;
        for (&k, b) in others.iter().zip(beta) {
            theta[(k, j)] = -b * tjj;
        }
    }
    linalg::symmetrize(&theta).0
}
