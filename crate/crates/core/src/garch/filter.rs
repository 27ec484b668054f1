//! Hamilton filter and Kim smoother over the parallel variance state.
//!
//! The realized shock fed to the variance recursion is
//! `u_t = r_t - sum_j xi_{t|t}(j) eta_j`, the return net of the filtered
//! regime mean. With equal regime means this is the exact shock.

use serde::{Deserialize, Serialize};

use super::MrsGarchParams;
use crate::error::{Error, Result};
use crate::stats;

#[derive(Debug, Clone)]
pub struct FilterOutput {
    pub loglik: f64,
    /// `P(regime_t = j | r_1..r_{t-1})`, T x k.
    pub predicted: Vec<Vec<f64>>,
    /// `P(regime_t = j | r_1..r_t)`, T x k.
    pub filtered: Vec<Vec<f64>>,
    /// Parallel conditional variances in force at each t, T x k.
    pub sigma2: Vec<Vec<f64>>,
    /// One-step-ahead parallel variances after the last observation.
    pub next_sigma2: Vec<f64>,
    /// One-step-ahead regime probabilities after the last observation.
    pub next_predicted: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimePath {
    /// Smoothed regime probabilities, T x k.
    pub probs: Vec<Vec<f64>>,
    /// Most likely regime per period.
    pub hard: Vec<usize>,
}

impl RegimePath {
    pub fn from_probs(probs: Vec<Vec<f64>>) -> Self {
        let hard = probs
            .iter()
            .map(|row| row.iter().enumerate().fold((0, f64::NEG_INFINITY), |b, (j, p)| if *p > b.1 { (j, *p) } else { b }).0)
            .collect();
        Self { probs, hard }
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Runs the filter with explicit starting state.
pub fn filter_from(params: &MrsGarchParams, returns: &[f64], init_probs: &[f64], init_sigma2: &[f64]) -> Result<FilterOutput> {
    let k = params.k();
    if init_probs.len() != k || init_sigma2.len() != k {
        return Err(Error::Shape("initial state does not match regime count".into()));
    }
    if let Some(r) = returns.iter().find(|r| !r.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite return {r}")));
    }
    let log_density = params.innovation.log_density();
    let t_len = returns.len();
    let mut predicted = Vec::with_capacity(t_len);
    let mut filtered = Vec::with_capacity(t_len);
    let mut sigma2_path = Vec::with_capacity(t_len);
    let mut pred = init_probs.to_vec();
    let mut sigma2 = init_sigma2.to_vec();
    let mut loglik = 0.0;
    let mut joint = vec![0.0; k];
    for &r in returns {
        for j in 0..k {
            let s2 = sigma2[j];
            let z = (r - params.eta[j]) / s2.sqrt();
            joint[j] = if pred[j] > 0.0 { pred[j].ln() + log_density(z) - 0.5 * s2.ln() } else { f64::NEG_INFINITY };
        }
        let lt = log_sum_exp(&joint);
        if !lt.is_finite() {
            return Err(Error::NoConvergence("filter likelihood underflow".into()));
        }
        loglik += lt;
        let filt: Vec<f64> = joint.iter().map(|l| (l - lt).exp()).collect();
        let u = r - filt.iter().zip(&params.eta).map(|(p, e)| p * e).sum::<f64>();
        predicted.push(std::mem::take(&mut pred));
        sigma2_path.push(sigma2.clone());
        let u2 = u * u;
        for j in 0..k {
            sigma2[j] = params.omega[j] + params.alpha[j] * u2 + params.beta[j] * sigma2[j];
        }
        pred = (0..k).map(|j| (0..k).map(|i| filt[i] * params.trans[i][j]).sum()).collect();
        filtered.push(filt);
    }
    Ok(FilterOutput { loglik, predicted, filtered, sigma2: sigma2_path, next_sigma2: sigma2, next_predicted: pred })
}

/// Log-likelihood only, without storing the filtered paths. Same recursion
/// as [`filter_from`].
pub(crate) fn loglik_from(params: &MrsGarchParams, returns: &[f64], init_probs: &[f64], init_sigma2: &[f64]) -> f64 {
    const MAX_K: usize = 3;
    let k = params.k();
    let log_density = params.innovation.log_density();
    let mut pred = [0.0; MAX_K];
    let mut sigma2 = [0.0; MAX_K];
    pred[..k].copy_from_slice(init_probs);
    sigma2[..k].copy_from_slice(init_sigma2);
    let mut joint = [f64::NEG_INFINITY; MAX_K];
    let mut filt = [0.0; MAX_K];
    let mut loglik = 0.0;
    for &r in returns {
        let mut m = f64::NEG_INFINITY;
        for j in 0..k {
            let s2 = sigma2[j];
            let z = (r - params.eta[j]) / s2.sqrt();
            joint[j] = if pred[j] > 0.0 { pred[j].ln() + log_density(z) - 0.5 * s2.ln() } else { f64::NEG_INFINITY };
            m = m.max(joint[j]);
        }
        if !m.is_finite() {
            return f64::NEG_INFINITY;
        }
        let mut total = 0.0;
        for j in 0..k {
            filt[j] = (joint[j] - m).exp();
            total += filt[j];
        }
        loglik += m + total.ln();
        let mut mean = 0.0;
        for j in 0..k {
            filt[j] /= total;
            mean += filt[j] * params.eta[j];
        }
        let u2 = (r - mean) * (r - mean);
        for j in 0..k {
            sigma2[j] = params.omega[j] + params.alpha[j] * u2 + params.beta[j] * sigma2[j];
            pred[j] = (0..k).map(|i| filt[i] * params.trans[i][j]).sum();
        }
    }
    loglik
}

/// Runs the filter from the stationary regime distribution and the
/// unconditional per-regime variances (sample variance for regimes that
/// are not stationary on their own).
pub fn filter(params: &MrsGarchParams, returns: &[f64]) -> Result<FilterOutput> {
    params.validate_basic()?;
    if returns.len() < 2 {
        return Err(Error::InsufficientData("filter needs at least 2 returns".into()));
    }
    let fallback = stats::variance(returns).max(1e-300);
    filter_from(params, returns, &params.stationary_distribution(), &params.initial_variance(fallback))
}

/// Filtered log-likelihood of a return series.
pub fn loglik(params: &MrsGarchParams, returns: &[f64]) -> Result<f64> {
    if returns.len() < 10 * params.k() {
        log::warn!("log-likelihood on {} returns for a {}-regime model", returns.len(), params.k());
    }
    Ok(filter(params, returns)?.loglik)
}

/// Kim smoother: `P(regime_t = j | r_1..r_T)`.
pub fn smooth(params: &MrsGarchParams, out: &FilterOutput) -> RegimePath {
    let k = params.k();
    let t_len = out.filtered.len();
    let mut probs = vec![vec![0.0; k]; t_len];
    if t_len == 0 {
        return RegimePath::from_probs(probs);
    }
    probs[t_len - 1] = out.filtered[t_len - 1].clone();
    for t in (0..t_len - 1).rev() {
        let ratio: Vec<f64> = (0..k)
            .map(|j| if out.predicted[t + 1][j] > 1e-300 { probs[t + 1][j] / out.predicted[t + 1][j] } else { 0.0 })
            .collect();
        let mut row: Vec<f64> =
            (0..k).map(|i| out.filtered[t][i] * (0..k).map(|j| params.trans[i][j] * ratio[j]).sum::<f64>()).collect();
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            row.iter_mut().for_each(|p| *p /= s);
        } else {
            row = out.filtered[t].clone();
        }
        probs[t] = row;
    }
    RegimePath::from_probs(probs)
}
