//! Curve-fit calibration of NTS tail and skew parameters.
//!
//! The loss is a weighted least-squares distance between the empirical
//! distribution function and the model CDF, evaluated at the empirical
//! quantiles of an equi-probability grid `p_i = (i + 1/2)/101`. The
//! weighting is the inverse of the Brownian-bridge covariance of the
//! empirical CDF, which reduces to a sum over grid increments
//! `(dF_model - dp)^2 / dp` including the two open end cells.

use serde::{Deserialize, Serialize};

use super::{std_gamma, InversionGrid, NtsMarginal, SubordinatorParams, LAMBDA_BOUNDS, NU_SHRINK, THETA_BOUNDS};
use crate::error::{Error, Result};
use crate::optim::{from_interval, golden_section, to_interval, NelderMead};

pub const FIT_GRID_POINTS: usize = 101;
/// Below this many residuals fits carry a small-sample warning.
pub const SMALL_SAMPLE: usize = 200;

/// Empirical quantiles on the fitting grid.
#[derive(Debug, Clone)]
pub struct CurveFit {
    pub probs: Vec<f64>,
    pub quantiles: Vec<f64>,
}

impl CurveFit {
    pub fn new(residuals: &[f64]) -> Result<Self> {
        if residuals.len() < 2 {
            return Err(Error::InsufficientData("curve fit needs at least 2 residuals".into()));
        }
        if residuals.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidParameter("non-finite residual".into()));
        }
        let mut xs = residuals.to_vec();
        xs.sort_by(f64::total_cmp);
        if xs[xs.len() - 1] - xs[0] <= 1e-12 * (1.0 + xs[0].abs()) {
            return Err(Error::InvalidParameter("degenerate residuals: all values equal".into()));
        }
        let n = xs.len();
        let probs: Vec<f64> = (0..FIT_GRID_POINTS).map(|i| (i as f64 + 0.5) / FIT_GRID_POINTS as f64).collect();
        let quantiles = probs
            .iter()
            .map(|&p| {
                let h = (n - 1) as f64 * p;
                let lo = h.floor() as usize;
                let hi = (lo + 1).min(n - 1);
                xs[lo] + (h - lo as f64) * (xs[hi] - xs[lo])
            })
            .collect();
        Ok(Self { probs, quantiles })
    }

    pub fn loss(&self, m: &NtsMarginal) -> f64 {
        let mut total = 0.0;
        let mut prev_err = 0.0;
        let mut prev_p = 0.0;
        for (x, p) in self.quantiles.iter().zip(&self.probs) {
            let err = m.cdf(*x) - p;
            let d = err - prev_err;
            total += d * d / (p - prev_p);
            prev_err = err;
            prev_p = *p;
        }
        total + prev_err * prev_err / (1.0 - prev_p)
    }
}

fn marginal_for_fit(lambda: f64, theta: f64, nu: f64) -> NtsMarginal {
    let m = NtsMarginal::standard(lambda, theta, nu, InversionGrid::coarse());
    if m.tail_cf() > 1e-8 {
        NtsMarginal::standard(lambda, theta, nu, InversionGrid::default())
    } else {
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub lambda: f64,
    pub theta: f64,
    /// Skew fitted jointly with the tail parameters (diagnostic only).
    pub nu: f64,
    pub loss: f64,
    pub small_sample: bool,
    pub converged: bool,
}

impl TailFit {
    pub fn subordinator(&self) -> SubordinatorParams {
        SubordinatorParams { lambda: self.lambda, theta: self.theta }
    }
}

const LOG_THETA: (f64, f64) = (-2.995_732_273_553_991, 3.912_023_005_428_146); // ln 0.05, ln 50

fn decode(v: &[f64]) -> (f64, f64, f64) {
    let lambda = to_interval(v[0], LAMBDA_BOUNDS.0, LAMBDA_BOUNDS.1);
    let theta = to_interval(v[1], LOG_THETA.0, LOG_THETA.1).exp();
    let bound = NU_SHRINK * (2.0 * theta / (2.0 - lambda)).sqrt();
    (lambda, theta, bound * v[2].tanh())
}

fn encode(lambda: f64, theta: f64, nu: f64) -> Vec<f64> {
    let lambda = lambda.clamp(LAMBDA_BOUNDS.0 + 1e-6, LAMBDA_BOUNDS.1 - 1e-6);
    let theta = theta.clamp(THETA_BOUNDS.0 * 1.0001, THETA_BOUNDS.1 * 0.9999);
    let bound = NU_SHRINK * (2.0 * theta / (2.0 - lambda)).sqrt();
    vec![
        from_interval(lambda, LAMBDA_BOUNDS.0, LAMBDA_BOUNDS.1),
        from_interval(theta.ln(), LOG_THETA.0, LOG_THETA.1),
        (nu / bound).clamp(-0.999, 0.999).atanh(),
    ]
}

/// Fits common tail parameters `(lambda, theta)` to standardized residuals.
///
/// The skew is fitted alongside so that an asymmetric sample does not bias
/// the tail estimates; it is reported but not used downstream.
pub fn fit_tail_params(residuals: &[f64], p0: SubordinatorParams) -> Result<TailFit> {
    let curve = CurveFit::new(residuals)?;
    let small_sample = residuals.len() < SMALL_SAMPLE;
    if small_sample {
        log::warn!("tail fit on only {} residuals", residuals.len());
    }
    let objective = |v: &[f64]| {
        let (l, t, nu) = decode(v);
        curve.loss(&marginal_for_fit(l, t, nu))
    };
    let nm = NelderMead { max_evals: 600, f_tol: 1e-12, x_tol: 1e-6, initial_step: 0.5 };
    let starts = [(p0.lambda, p0.theta), (1.0, 1.0), (1.6, 5.0), (0.5, 0.3)];
    let mut best: Option<crate::optim::Minimum> = None;
    for (l, t) in starts {
        let m = nm.minimize(objective, &encode(l, t, 0.0));
        if best.as_ref().is_none_or(|b| m.f < b.f) {
            best = Some(m);
        }
    }
    let mut best = best.expect("at least one start");
    if best.f.is_finite() {
        // restart from the best point
        let polished = nm.minimize(objective, &best.x);
        if polished.f <= best.f {
            best = polished;
        }
    }
    if !best.f.is_finite() {
        return Err(Error::NoConvergence("tail-parameter curve fit".into()));
    }
    let (lambda, theta, nu) = decode(&best.x);
    Ok(TailFit { lambda, theta, nu, loss: best.f, small_sample, converged: best.converged })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewFit {
    pub nu: f64,
    pub gamma: f64,
    pub loss: f64,
    pub small_sample: bool,
}

/// Fits the skew `nu` of a standardized NTS margin with `(lambda, theta)`
/// held fixed. `|nu|` stays within `0.999 sqrt(2 theta / (2 - lambda))`.
pub fn fit_skew(residuals: &[f64], lambda: f64, theta: f64) -> Result<SkewFit> {
    let sub = SubordinatorParams::new(lambda, theta)?;
    let curve = CurveFit::new(residuals)?;
    let small_sample = residuals.len() < SMALL_SAMPLE;
    let bound = NU_SHRINK * sub.nu_bound();
    let loss = |nu: f64| curve.loss(&marginal_for_fit(lambda, theta, nu));
    let k = 40;
    let grid: Vec<f64> = (0..=k).map(|i| -bound + 2.0 * bound * i as f64 / k as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&nu| loss(nu)).collect();
    let (imin, _) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::NoConvergence("skew scan".into()))?;
    let lo = grid[imin.saturating_sub(1)];
    let hi = grid[(imin + 1).min(k)];
    let (nu, f) = golden_section(loss, lo, hi, 1e-7 * bound.max(1.0));
    if !f.is_finite() {
        return Err(Error::NoConvergence("skew curve fit".into()));
    }
    Ok(SkewFit { nu, gamma: std_gamma(lambda, theta, nu), loss: f, small_sample })
}
