//! Regime-conditional correlation, eigenvalue denoising and positive
//! definite repair.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::stats;

/// Sample correlation of the residual rows whose regime equals `regime`.
/// `residuals` is T x N (one row per period).
pub fn regime_conditional_residual_corr(residuals: &[Vec<f64>], path: &[usize], regime: usize) -> Result<DMatrix<f64>> {
    if residuals.len() != path.len() {
        return Err(Error::Shape(format!("{} residual rows but {} regime labels", residuals.len(), path.len())));
    }
    let n = residuals.first().map_or(0, Vec::len);
    let rows: Vec<Vec<f64>> = residuals.iter().zip(path).filter(|(_, &h)| h == regime).map(|(r, _)| r.clone()).collect();
    if rows.len() < n + 2 {
        return Err(Error::SparseRegime { regime, count: rows.len(), needed: n + 2 });
    }
    let corr = stats::cov_to_corr(&stats::covariance(&rows));
    if corr.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("residuals in regime {regime} have zero variance")));
    }
    Ok(corr)
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Shape("matrix must be square".into()));
    }
    let scale = m.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    let asym = (m - m.transpose()).iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if asym > 1e-10 * scale {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

fn rebuild(vectors: &DMatrix<f64>, values: &DVector<f64>) -> DMatrix<f64> {
    let m = vectors * DMatrix::from_diagonal(values) * vectors.transpose();
    (&m + m.transpose()) * 0.5
}

/// Rescales a matrix with positive diagonal to unit diagonal.
pub fn unit_diagonal(m: &DMatrix<f64>) -> DMatrix<f64> {
    let d: Vec<f64> = (0..m.nrows()).map(|i| m[(i, i)].sqrt()).collect();
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| if i == j { 1.0 } else { m[(i, j)] / (d[i] * d[j]) })
}

#[derive(Debug, Clone)]
pub struct Denoised {
    pub matrix: DMatrix<f64>,
    /// Reconstructed matrix before unit-diagonal rescaling.
    pub unscaled: DMatrix<f64>,
    pub edge: f64,
    /// Number of eigenvalues at or above the noise edge.
    pub kept: usize,
}

/// Replaces the eigenvalues of a correlation matrix that lie below the
/// Marchenko-Pastur upper edge `(1 + sqrt(N/t))^2` by their average and
/// rescales back to unit diagonal.
pub fn denoise_correlation(corr: &DMatrix<f64>, t_obs: usize) -> Result<Denoised> {
    check_symmetric(corr)?;
    let n = corr.nrows();
    if t_obs <= n {
        return Err(Error::InsufficientData(format!("denoising {n} assets needs more than {n} observations, got {t_obs}")));
    }
    let edge = (1.0 + (n as f64 / t_obs as f64).sqrt()).powi(2);
    let eig = SymmetricEigen::new(corr.clone());
    let noise: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] < edge).collect();
    let mut values = eig.eigenvalues.clone();
    if !noise.is_empty() {
        let avg = noise.iter().map(|&i| values[i]).sum::<f64>() / noise.len() as f64;
        for &i in &noise {
            values[i] = avg;
        }
    }
    let unscaled = rebuild(&eig.eigenvectors, &values);
    let matrix = unit_diagonal(&unscaled);
    Ok(Denoised { matrix, unscaled, edge, kept: n - noise.len() })
}

/// Eigenvalue clipping at `floor` without rescaling.
pub fn clip_eigenvalues(m: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let values = eig.eigenvalues.map(|v| v.max(floor));
    rebuild(&eig.eigenvectors, &values)
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Nearest positive definite correlation matrix under eigenvalue clipping:
/// eigenvalues are clipped at a floor, the result is rescaled to unit
/// diagonal and the floor is doubled until the smallest eigenvalue of the
/// rescaled matrix is at least `eps`.
pub fn nearest_psd(m: &DMatrix<f64>, eps: f64) -> Result<DMatrix<f64>> {
    check_symmetric(m)?;
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("matrix has non-finite entries".into()));
    }
    let sym = (m + m.transpose()) * 0.5;
    let unit = (0..m.nrows()).all(|i| sym[(i, i)] == 1.0);
    if min_eigenvalue(&sym) >= eps {
        let r = if unit { sym.clone() } else { unit_diagonal(&sym) };
        if min_eigenvalue(&r) >= eps {
            return Ok(r);
        }
    }
    nearest_psd_clipped(&sym, eps)
}

fn nearest_psd_clipped(sym: &DMatrix<f64>, eps: f64) -> Result<DMatrix<f64>> {
    let mut floor = eps;
    for _ in 0..200 {
        let r = unit_diagonal(&clip_eigenvalues(sym, floor));
        if min_eigenvalue(&r) >= eps {
            return Ok(r);
        }
        floor *= 2.0;
    }
    Err(Error::NoConvergence("positive definite repair".into()))
}

/// `diag(gamma)^-1 (Sigma_X - c nu nu^T) diag(gamma)^-1` with
/// `c = (2 - lambda)/(2 theta)`, before repair.
pub fn implied_internal_sigma_raw(sigma_x: &DMatrix<f64>, lambda: f64, theta: f64, nu: &[f64], gamma: &[f64]) -> Result<DMatrix<f64>> {
    let n = sigma_x.nrows();
    if nu.len() != n || gamma.len() != n {
        return Err(Error::Shape("nu and gamma must match the matrix dimension".into()));
    }
    if gamma.iter().any(|g| !(*g > 0.0)) {
        return Err(Error::InvalidParameter("gamma entries must be positive".into()));
    }
    let c = (2.0 - lambda) / (2.0 * theta);
    Ok(DMatrix::from_fn(n, n, |i, j| (sigma_x[(i, j)] - c * nu[i] * nu[j]) / (gamma[i] * gamma[j])))
}

/// Internal correlation of the normal component implied by a residual
/// correlation matrix, repaired to be positive definite.
pub fn implied_internal_sigma(sigma_x: &DMatrix<f64>, lambda: f64, theta: f64, nu: &[f64], gamma: &[f64], eps: f64) -> Result<DMatrix<f64>> {
    let raw = implied_internal_sigma_raw(sigma_x, lambda, theta, nu, gamma)?;
    nearest_psd(&raw, eps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicated_and_flipped_residuals() {
        let xs = [0.3, -1.2, 0.5, 2.0, -0.7, 0.1];
        let dup: Vec<Vec<f64>> = xs.iter().map(|x| vec![*x, *x]).collect();
        let path = vec![0; xs.len()];
        let c = regime_conditional_residual_corr(&dup, &path, 0).unwrap();
        assert!((c[(0, 1)] - 1.0).abs() < 1e-14);
        let flip: Vec<Vec<f64>> = xs.iter().map(|x| vec![*x, -x]).collect();
        let c = regime_conditional_residual_corr(&flip, &path, 0).unwrap();
        assert!((c[(0, 1)] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn sparse_regime_is_an_error() {
        let rows = vec![vec![0.1, 0.2]; 5];
        let path = vec![0, 0, 0, 1, 1];
        assert!(matches!(regime_conditional_residual_corr(&rows, &path, 1), Err(Error::SparseRegime { count: 2, needed: 4, .. })));
    }

    #[test]
    fn identity_is_fixed_by_denoising() {
        let id = DMatrix::<f64>::identity(4, 4);
        let d = denoise_correlation(&id, 100).unwrap();
        assert!((d.matrix - id).abs().max() < 1e-12);
        assert!(denoise_correlation(&DMatrix::identity(4, 4), 4).is_err());
    }

    #[test]
    fn indefinite_two_by_two_is_repaired() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.2, 1.2, 1.0]);
        let r = nearest_psd(&m, 1e-8).unwrap();
        assert!(min_eigenvalue(&r) >= 1e-8);
        assert!(r[(0, 1)] < 1.2);
        assert!((r[(0, 0)] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn negative_eigenvalue_is_clipped_to_floor() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -0.5]);
        let c = clip_eigenvalues(&m, 1e-8);
        assert_eq!(c, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-8]));
    }

    #[test]
    fn positive_definite_input_is_unchanged() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.1, 0.3, 1.0, -0.2, 0.1, -0.2, 1.0]);
        assert_eq!(nearest_psd(&m, 1e-8).unwrap(), m);
    }

    #[test]
    fn non_symmetric_input_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.2, 1.0]);
        assert!(matches!(nearest_psd(&m, 1e-8), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn zero_skew_leaves_sigma_x_unchanged() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 1.0]);
        let s = implied_internal_sigma(&m, 1.2, 1.0, &[0.0, 0.0], &[1.0, 1.0], 1e-8).unwrap();
        assert_eq!(s, m);
    }
}
