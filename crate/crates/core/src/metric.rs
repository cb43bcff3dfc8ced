//! Sentence-level distance metrics.
//!
//! All metrics follow the "smaller is closer" contract used by GMD. The
//! learned metric is a Mahalanobis distance `sqrt((x - y)ᵀ M (x - y))` with a
//! symmetric positive-semidefinite `M`; [`MahalanobisMetric::factorize`]
//! recovers a factor `L` with `LᵀL = M`, so the same distance can be written
//! as `‖Lx - Ly‖`.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;

/// Eigenvalues in `[-PSD_TOLERANCE, 0)` are clamped to zero; anything more
/// negative is rejected.
pub const PSD_TOLERANCE: f64 = 1e-9;
/// Norm below which a vector has no direction for cosine distance.
pub const ZERO_NORM: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("cosine distance undefined for a zero vector")]
    ZeroVector,
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },
    #[error("bad metric header: {0}")]
    BadHeader(String),
    #[error("header declares dim {header_dim} ({expected_bytes} body bytes) but body has {found_bytes} bytes")]
    DimMismatch {
        header_dim: usize,
        expected_bytes: usize,
        found_bytes: usize,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Itml,
    Sdml,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Itml => "itml",
            Algorithm::Sdml => "sdml",
        })
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "itml" => Ok(Algorithm::Itml),
            "sdml" => Ok(Algorithm::Sdml),
            other => Err(format!("unknown algorithm {other:?} (expected itml or sdml)")),
        }
    }
}

/// How a learned matrix came to be.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub algorithm: Algorithm,
    pub trained_pairs: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MahalanobisMetric {
    matrix: DMatrix<f64>,
    provenance: Provenance,
}

impl MahalanobisMetric {
    /// Symmetrizes `matrix` and enforces positive semidefiniteness. Tiny
    /// negative eigenvalues (down to `-PSD_TOLERANCE`) are clamped to zero.
    pub fn new(matrix: DMatrix<f64>, provenance: Provenance) -> Result<Self, MetricError> {
        let (rows, cols) = matrix.shape();
        if rows != cols || rows == 0 {
            return Err(MetricError::NotSquare { rows, cols });
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(MetricError::NonFinite);
        }
        let (sym, _) = linalg::symmetrize(&matrix);
        let min_eig = linalg::min_eigenvalue(&sym);
        let matrix = if min_eig >= 0.0 {
            sym
        } else if min_eig >= -PSD_TOLERANCE {
            linalg::clamp_spectrum(&sym, 0.0)
        } else {
            return Err(MetricError::NotPositiveSemidefinite {
                min_eigenvalue: min_eig,
            });
        };
        Ok(Self { matrix, provenance })
    }

    /// The untrained model: `M = I`, which is exactly Euclidean distance.
    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: DMatrix::identity(dim, dim),
            provenance: Provenance {
                algorithm: Algorithm::Itml,
                trained_pairs: 0,
                seed: 0,
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// `(x - y)ᵀ M (x - y)` without bounds checks on the caller's side
    /// beyond equal lengths matching `dim`.
    ///
    /// The inner product runs over column `i` of `M` (equal to row `i`, since
    /// `M` is stored exactly symmetric). With `M = I` every inner sum is
    /// exactly `v_i`, so the result is bitwise equal to the Euclidean sum of
    /// squares accumulated in the same order.
    fn squared<T: Copy + Into<f64>>(&self, x: &[T], y: &[T]) -> f64 {
        let d = self.dim();
        let m = self.matrix.as_slice();
        let mut acc = 0.0;
        for i in 0..d {
            let vi = x[i].into() - y[i].into();
            let col = &m[i * d..(i + 1) * d];
            let mut s = 0.0;
            for j in 0..d {
                s += col[j] * (x[j].into() - y[j].into());
            }
            acc += vi * s;
        }
        acc
    }

    /// Returns `L` with `LᵀL = M`, computed as `diag(sqrt(λ)) Qᵀ` from the
    /// eigendecomposition `M = Q diag(λ) Qᵀ` (negative eigenvalues clamped).
    pub fn factorize(&self) -> DMatrix<f64> {
        let eig = SymmetricEigen::new(self.matrix.clone());
        let sqrt = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        DMatrix::from_diagonal(&sqrt) * eig.eigenvectors.transpose()
    }

    /// A copy with `M` scaled by `c > 0`; all distances scale by `sqrt(c)`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            matrix: &self.matrix * c,
            provenance: self.provenance.clone(),
        }
    }
}

/// The distance used between sentence embeddings.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricKind {
    Euclidean,
    CosineDistance,
    Mahalanobis(MahalanobisMetric),
}

impl MetricKind {
    pub fn name(&self) -> String {
        match self {
            MetricKind::Euclidean => "euclidean".into(),
            MetricKind::CosineDistance => "cosine".into(),
            MetricKind::Mahalanobis(m) => format!("mahalanobis:{}", m.provenance().algorithm),
        }
    }

    /// Dimension required of inputs, if the metric fixes one.
    pub fn dim(&self) -> Option<usize> {
        match self {
            MetricKind::Mahalanobis(m) => Some(m.dim()),
            _ => None,
        }
    }

    pub fn check_dim(&self, found: usize) -> Result<(), MetricError> {
        match self.dim() {
            Some(expected) if expected != found => {
                Err(MetricError::DimensionMismatch { expected, found })
            }
            _ => Ok(()),
        }
    }

    pub fn distance<T: Copy + Into<f64>>(&self, x: &[T], y: &[T]) -> Result<f64, MetricError> {
        if x.len() != y.len() {
            return Err(MetricError::DimensionMismatch {
                expected: x.len(),
                found: y.len(),
            });
        }
        self.check_dim(x.len())?;
        match self {
            MetricKind::Euclidean => Ok(squared_euclidean(x, y).sqrt()),
            MetricKind::CosineDistance => {
                let (mut dot, mut nx, mut ny) = (0.0, 0.0, 0.0);
                for (&a, &b) in x.iter().zip(y) {
                    let (a, b) = (a.into(), b.into());
                    dot += a * b;
                    nx += a * a;
                    ny += b * b;
                }
                let (nx, ny) = (nx.sqrt(), ny.sqrt());
                if nx < ZERO_NORM || ny < ZERO_NORM {
                    return Err(MetricError::ZeroVector);
                }
                Ok((1.0 - dot / (nx * ny)).clamp(0.0, 2.0))
            }
            MetricKind::Mahalanobis(m) => Ok(m.squared(x, y).max(0.0).sqrt()),
        }
    }
}

fn squared_euclidean<T: Copy + Into<f64>>(x: &[T], y: &[T]) -> f64 {
    let mut acc = 0.0;
    for i in 0..x.len() {
        let v = x[i].into() - y[i].into();
        acc += v * v;
    }
    acc
}

#[derive(Serialize, Deserialize)]
struct MetricHeader {
    dim: usize,
    algorithm: Algorithm,
    trained_pairs: u64,
    seed: u64,
}

/// Writes a JSON header line followed by `dim * dim` little-endian `f64`
/// values (row-major).
pub fn save_metric(metric: &MahalanobisMetric, path: impl AsRef<Path>) -> Result<(), MetricError> {
    let path = path.as_ref();
    let header = MetricHeader {
        dim: metric.dim(),
        algorithm: metric.provenance.algorithm,
        trained_pairs: metric.provenance.trained_pairs,
        seed: metric.provenance.seed,
    };
    let mut bytes = serde_json::to_vec(&header).expect("header serializes");
    bytes.push(b'\n');
    let d = metric.dim();
    for i in 0..d {
        for j in 0..d {
            bytes.extend_from_slice(&metric.matrix[(i, j)].to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|source| MetricError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_metric(path: impl AsRef<Path>) -> Result<MahalanobisMetric, MetricError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| MetricError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_metric(&bytes)
}

pub fn parse_metric(bytes: &[u8]) -> Result<MahalanobisMetric, MetricError> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| MetricError::BadHeader("missing header line".into()))?;
    let header: MetricHeader = serde_json::from_slice(&bytes[..nl])
        .map_err(|e| MetricError::BadHeader(e.to_string()))?;
    if header.dim == 0 {
        return Err(MetricError::BadHeader("dim must be positive".into()));
    }
    let body = &bytes[nl + 1..];
    let expected_bytes = header
        .dim
        .checked_mul(header.dim)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| MetricError::BadHeader(format!("dim {} too large", header.dim)))?;
    if body.len() != expected_bytes {
        return Err(MetricError::DimMismatch {
            header_dim: header.dim,
            expected_bytes,
            found_bytes: body.len(),
        });
    }
    let d = header.dim;
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let matrix = DMatrix::from_row_slice(d, d, &values);
    let (_, asym) = linalg::symmetrize(&matrix);
    if asym > 0.0 {
        log::warn!("metric matrix is asymmetric (max |M - Mᵀ| = {asym:e}); using (M + Mᵀ)/2");
    }
    MahalanobisMetric::new(
        matrix,
        Provenance {
            algorithm: header.algorithm,
            trained_pairs: header.trained_pairs,
            seed: header.seed,
        },
    )
}
