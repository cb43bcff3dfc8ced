use nalgebra::{DMatrix, SymmetricEigen};

/// `(M + Mᵀ) / 2`, plus the largest absolute asymmetry that was removed.
pub(crate) fn symmetrize(m: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let n = m.nrows();
    let mut out = m.clone();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (m[(i, j)], m[(j, i)]);
            worst = worst.max((a - b).abs());
            let avg = (a + b) / 2.0;
            out[(i, j)] = avg;
            out[(j, i)] = avg;
        }
    }
    (out, worst)
}

pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// `Q max(Λ, floor) Qᵀ`.
pub(crate) fn clamp_spectrum(m: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let lambda = eig.eigenvalues.map(|l| l.max(floor));
    let q = &eig.eigenvectors;
    let out = q * DMatrix::from_diagonal(&lambda) * q.transpose();
    symmetrize(&out).0
}

/// Inverse of a symmetric positive-definite matrix, with eigenvalues floored
/// at `floor` so that nearly singular inputs still produce a usable result.
pub(crate) fn spd_inverse(m: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let inv = eig.eigenvalues.map(|l| 1.0 / l.max(floor));
    let q = &eig.eigenvectors;
    symmetrize(&(q * DMatrix::from_diagonal(&inv) * q.transpose())).0
}

/// `log det M` of a symmetric positive-definite matrix, `None` if not PD.
pub(crate) fn log_det_spd(m: &DMatrix<f64>) -> Option<f64> {
    let chol = m.clone().cholesky()?;
    Some(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

/// Sample covariance (divided by n) of the given row vectors.
pub(crate) fn covariance<'a>(rows: impl Iterator<Item = &'a [f64]>, dim: usize) -> DMatrix<f64> {
    let rows: Vec<&[f64]> = rows.collect();
    let n = rows.len().max(1) as f64;
    let mut mean = vec![0.0; dim];
    for r in &rows {
        for (m, v) in mean.iter_mut().zip(r.iter()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut cov = DMatrix::zeros(dim, dim);
    for r in &rows {
        for i in 0..dim {
            let di = r[i] - mean[i];
            for j in i..dim {
                cov[(i, j)] += di * (r[j] - mean[j]);
            }
        }
    }
    for i in 0..dim {
        for j in i..dim {
            let v = cov[(i, j)] / n;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    cov
}

/// numpy-style linear-interpolation percentile, `q` in [0, 100].
pub(crate) fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_matches_numpy_linear() {
        let v = [1.0, 2.0, 3.0, 4.0, 10.0];
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 100.0), 10.0);
        assert_eq!(percentile(&v, 50.0), 3.0);
        // np.percentile([1,2,3,4,10], 95) == 8.8
        assert!((percentile(&v, 95.0) - 8.8).abs() < 1e-12);
    }

    #[test]
    fn log_det_of_diagonal() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 3.0, 0.5]));
        assert!((log_det_spd(&m).unwrap() - 3.0f64.ln()).abs() < 1e-12);
        assert!(log_det_spd(&(-m)).is_none());
    }

    #[test]
    fn inverse_round_trip() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let inv = spd_inverse(&m, 1e-12);
        let id = &m * &inv;
        assert!((id - DMatrix::identity(2, 2)).norm() < 1e-12);
    }
}
