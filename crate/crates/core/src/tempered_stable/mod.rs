//! Tempered-stable subordinator and the (standardized) multivariate normal
//! tempered stable (MNTS) law.
//!
//! An MNTS vector is the normal variance-mean mixture
//! `X = mu + nu (T - 1) + sqrt(T) diag(gamma) xi`, `xi ~ N(0, Sigma)`,
//! where `T` is a tempered-stable subordinator with `E[T] = 1` and
//! `Var[T] = (2 - lambda) / (2 theta)`. Choosing
//! `gamma_n = sqrt(1 - nu_n^2 (2 - lambda) / (2 theta))` and `mu = 0`
//! gives zero-mean, unit-variance margins (stdMNTS).

pub mod calibrate;
mod marginal;
mod mnts;
mod subordinator;

pub use calibrate::{fit_skew, fit_tail_params, CurveFit, SkewFit, TailFit, FIT_GRID_POINTS, SMALL_SAMPLE};
pub use marginal::{InversionGrid, NtsMarginal};
pub use mnts::{mnts_sample, MntsSampler};
pub use subordinator::{sample_subordinator_one, subordinator_cf, subordinator_sample};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Admissible calibration box.
pub const LAMBDA_BOUNDS: (f64, f64) = (0.05, 1.95);
pub const THETA_BOUNDS: (f64, f64) = (0.05, 50.0);
/// Fraction of the skew bound `sqrt(2 theta / (2 - lambda))` allowed when fitting.
pub const NU_SHRINK: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubordinatorParams {
    pub lambda: f64,
    pub theta: f64,
}

impl SubordinatorParams {
    pub fn new(lambda: f64, theta: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 2.0) {
            return Err(Error::InvalidParameter(format!("lambda must lie in (0, 2), got {lambda}")));
        }
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::InvalidParameter(format!("theta must be positive, got {theta}")));
        }
        Ok(Self { lambda, theta })
    }

    /// `Var[T] = (2 - lambda) / (2 theta)`; also the coefficient of the skew
    /// correction in the covariance identity.
    pub fn variance(&self) -> f64 {
        (2.0 - self.lambda) / (2.0 * self.theta)
    }

    /// Largest admissible `|nu|` for a standardized margin.
    pub fn nu_bound(&self) -> f64 {
        (2.0 * self.theta / (2.0 - self.lambda)).sqrt()
    }
}

/// `gamma = sqrt(1 - nu^2 (2 - lambda) / (2 theta))`.
pub fn std_gamma(lambda: f64, theta: f64, nu: f64) -> f64 {
    (1.0 - nu * nu * (2.0 - lambda) / (2.0 * theta)).max(0.0).sqrt()
}

/// General MNTS parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MntsParams {
    pub lambda: f64,
    pub theta: f64,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Correlation matrix of the underlying normal, row-major.
    pub sigma: Vec<Vec<f64>>,
}

impl MntsParams {
    pub fn validate(&self) -> Result<()> {
        SubordinatorParams::new(self.lambda, self.theta)?;
        let n = self.dim();
        if self.nu.len() != n || self.gamma.len() != n || self.sigma.len() != n || self.sigma.iter().any(|r| r.len() != n) {
            return Err(Error::Shape("MNTS parameter vectors disagree in dimension".into()));
        }
        if self.gamma.iter().any(|g| !(*g > 0.0)) {
            return Err(Error::InvalidParameter("gamma entries must be positive".into()));
        }
        for i in 0..n {
            if (self.sigma[i][i] - 1.0).abs() > 1e-8 {
                return Err(Error::InvalidParameter("sigma must have unit diagonal".into()));
            }
            for j in 0..i {
                if (self.sigma[i][j] - self.sigma[j][i]).abs() > 1e-10 {
                    return Err(Error::NotSymmetric((self.sigma[i][j] - self.sigma[j][i]).abs()));
                }
            }
        }
        if self.sigma_matrix().cholesky().is_none() {
            return Err(Error::InvalidParameter("sigma is not positive definite".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn subordinator(&self) -> SubordinatorParams {
        SubordinatorParams { lambda: self.lambda, theta: self.theta }
    }

    pub fn sigma_matrix(&self) -> DMatrix<f64> {
        let n = self.sigma.len();
        DMatrix::from_fn(n, n, |i, j| self.sigma[i][j])
    }

    /// `diag(gamma) Sigma diag(gamma) + (2 - lambda)/(2 theta) nu nu^T`.
    pub fn covariance(&self) -> DMatrix<f64> {
        covariance_identity(self.lambda, self.theta, &self.nu, &self.gamma, &self.sigma_matrix())
    }
}

/// Standardized MNTS: `mu = 0`, `gamma` implied by `nu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StdMntsParams {
    pub lambda: f64,
    pub theta: f64,
    pub nu: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
}

impl StdMntsParams {
    pub fn new(lambda: f64, theta: f64, nu: Vec<f64>, sigma: Vec<Vec<f64>>) -> Result<Self> {
        let p = Self { lambda, theta, nu, sigma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let sub = SubordinatorParams::new(self.lambda, self.theta)?;
        let bound = sub.nu_bound();
        if let Some(v) = self.nu.iter().find(|v| !(v.abs() < bound)) {
            return Err(Error::InvalidParameter(format!("|nu| = {} not below bound {bound}", v.abs())));
        }
        self.to_mnts().validate()
    }

    pub fn dim(&self) -> usize {
        self.nu.len()
    }

    pub fn subordinator(&self) -> SubordinatorParams {
        SubordinatorParams { lambda: self.lambda, theta: self.theta }
    }

    pub fn gamma(&self) -> Vec<f64> {
        self.nu.iter().map(|&v| std_gamma(self.lambda, self.theta, v)).collect()
    }

    pub fn to_mnts(&self) -> MntsParams {
        MntsParams {
            lambda: self.lambda,
            theta: self.theta,
            mu: vec![0.0; self.nu.len()],
            nu: self.nu.clone(),
            gamma: self.gamma(),
            sigma: self.sigma.clone(),
        }
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        self.to_mnts().covariance()
    }

    /// Univariate marginal of component `n`.
    pub fn marginal(&self, n: usize, grid: InversionGrid) -> NtsMarginal {
        NtsMarginal::standard(self.lambda, self.theta, self.nu[n], grid)
    }
}

/// Covariance of an MNTS vector. The skew correction is the outer product
/// `nu nu^T`.
pub fn covariance_identity(lambda: f64, theta: f64, nu: &[f64], gamma: &[f64], sigma: &DMatrix<f64>) -> DMatrix<f64> {
    let c = (2.0 - lambda) / (2.0 * theta);
    let n = nu.len();
    DMatrix::from_fn(n, n, |i, j| gamma[i] * sigma[(i, j)] * gamma[j] + c * nu[i] * nu[j])
}
