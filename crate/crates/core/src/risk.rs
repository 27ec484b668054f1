//! Scenario estimators of VaR, CVaR and drawdown-based risk.
//!
//! Returns and drawdowns are in uncompounded units. With confidence level
//! `eta`, the tail averages cover the worst `1 - eta` share of outcomes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::ScenarioCube;

const SNAP: f64 = 1e-9;

fn check_samples(samples: &[f64]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::InsufficientData("risk estimate on an empty sample".into()));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite sample".into()));
    }
    Ok(())
}

fn check_open_level(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidParameter(format!("confidence level must lie in (0, 1), got {eta}")));
    }
    Ok(())
}

fn check_closed_level(eta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter(format!("confidence level must lie in [0, 1], got {eta}")));
    }
    Ok(())
}

/// Number of order statistics in the tail, `ceil(S (1 - eta))`, with
/// products within rounding noise of an integer snapped to it.
pub fn tail_count(s: usize, eta: f64) -> usize {
    let v = s as f64 * (1.0 - eta);
    let r = v.round();
    let k = if (v - r).abs() <= SNAP * r.max(1.0) { r } else { v.ceil() };
    (k as usize).clamp(1, s)
}

fn sorted(samples: &[f64]) -> Vec<f64> {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Loss quantile: minus the `ceil(S (1 - eta))`-th smallest sample.
pub fn var_scenario(samples: &[f64], eta: f64) -> Result<f64> {
    check_samples(samples)?;
    check_open_level(eta)?;
    let v = sorted(samples);
    Ok(-v[tail_count(v.len(), eta) - 1])
}

/// Weighted tail average of the worst `1 - eta` share of samples, with the
/// boundary order statistic carrying the fractional weight.
pub fn cvar_scenario(samples: &[f64], eta: f64) -> Result<f64> {
    check_samples(samples)?;
    check_open_level(eta)?;
    let v = sorted(samples);
    let s = v.len() as f64;
    let k = tail_count(v.len(), eta);
    let tail = 1.0 - eta;
    let inner: f64 = v[..k - 1].iter().sum::<f64>() / s;
    let edge = (tail - (k - 1) as f64 / s).max(0.0) * v[k - 1];
    Ok(-(inner + edge) / tail)
}

/// `DD_m = max(0, U_1..U_m) - U_m` for an accumulated path `U_1..U_M`.
pub fn drawdowns(accum: &[f64]) -> Vec<f64> {
    let mut peak = 0.0f64;
    accum
        .iter()
        .map(|&u| {
            peak = peak.max(u);
            peak - u
        })
        .collect()
}

/// Average drawdown; 0 for an empty series.
pub fn add(dd: &[f64]) -> f64 {
    if dd.is_empty() {
        return 0.0;
    }
    dd.iter().sum::<f64>() / dd.len() as f64
}

/// Maximum drawdown; 0 for an empty series.
pub fn mdd(dd: &[f64]) -> f64 {
    dd.iter().cloned().fold(0.0, f64::max)
}

/// Rockafellar-Uryasev objective `zeta + sum (x - zeta)^+ / ((1 - eta) n)`
/// minimized over the sample values.
fn variational_tail(values: &[f64], eta: f64) -> f64 {
    if eta >= 1.0 {
        return mdd(values);
    }
    let denom = (1.0 - eta) * values.len() as f64;
    let v = sorted(values);
    // Suffix sums give each candidate objective in O(1).
    let mut suffix = vec![0.0; v.len() + 1];
    for i in (0..v.len()).rev() {
        suffix[i] = suffix[i + 1] + v[i];
    }
    // Numerators are compared and divided once at the end.
    let mut best = f64::INFINITY;
    for (i, &z) in v.iter().enumerate() {
        let above = v[i..].partition_point(|x| *x <= z) + i;
        let excess = suffix[above] - z * (v.len() - above) as f64;
        best = best.min(z * denom + excess);
    }
    best / denom
}

/// Tail average with an explicit quantile: the atom-corrected form
/// `((n F(zeta) - eta n) zeta + sum_{x > zeta} x) / ((1 - eta) n)`.
fn mixed_tail(values: &[f64], eta: f64) -> f64 {
    if eta >= 1.0 {
        return mdd(values);
    }
    let n = values.len() as f64;
    let v = sorted(values);
    let zeta = if eta <= 0.0 {
        0.0
    } else {
        let idx = v.iter().enumerate().position(|(i, _)| (i + 1) as f64 / n >= eta - SNAP).unwrap_or(v.len() - 1);
        v[idx]
    };
    let at_or_below = v.partition_point(|x| *x <= zeta) as f64;
    let front = (at_or_below - eta * n).max(0.0) * zeta;
    let tail: f64 = v.iter().filter(|x| **x > zeta).sum();
    (front + tail) / ((1.0 - eta) * n)
}

/// CDaR of one path's drawdown series via the variational form.
pub fn cdar_single(dd: &[f64], eta: f64) -> Result<f64> {
    check_closed_level(eta)?;
    if dd.is_empty() {
        return Err(Error::InsufficientData("empty drawdown series".into()));
    }
    if eta == 0.0 {
        return Ok(add(dd));
    }
    Ok(variational_tail(dd, eta))
}

/// CDaR of one path's drawdown series via the quantile form.
pub fn cdar_mixed(dd: &[f64], eta: f64) -> Result<f64> {
    check_closed_level(eta)?;
    if dd.is_empty() {
        return Err(Error::InsufficientData("empty drawdown series".into()));
    }
    Ok(mixed_tail(dd, eta))
}

/// CDaR over S paths with the drawdown distribution pooled across paths
/// (`dd` is S x M).
pub fn cdar_multi(dd: &[Vec<f64>], eta: f64) -> Result<f64> {
    check_closed_level(eta)?;
    let m = dd.first().map_or(0, Vec::len);
    if m == 0 || dd.iter().any(|row| row.len() != m) {
        return Err(Error::Shape("drawdown matrix must be S x M with M >= 1".into()));
    }
    let pooled: Vec<f64> = dd.iter().flatten().cloned().collect();
    Ok(mixed_tail(&pooled, eta))
}

/// S x M drawdowns of accumulated paths.
pub fn drawdown_matrix(paths: &[Vec<f64>]) -> Vec<Vec<f64>> {
    paths.iter().map(|p| drawdowns(p)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RiskMeasure {
    /// CVaR of the horizon (day-M) portfolio return.
    Cvar { eta: f64 },
    /// Multi-path CDaR of the accumulated portfolio paths.
    Cdar { eta: f64 },
    /// Standard deviation of the horizon portfolio return.
    Variance,
}

impl RiskMeasure {
    pub fn validate(&self) -> Result<()> {
        match self {
            RiskMeasure::Cvar { eta } => check_open_level(*eta),
            RiskMeasure::Cdar { eta } => check_closed_level(*eta),
            RiskMeasure::Variance => Ok(()),
        }
    }

    pub fn name(&self) -> String {
        match self {
            RiskMeasure::Cvar { eta } => format!("{eta}-CVaR"),
            RiskMeasure::Cdar { eta } => format!("{eta}-CDaR"),
            RiskMeasure::Variance => "SD".into(),
        }
    }

    /// Risk of a portfolio on a scenario cube.
    pub fn evaluate(&self, cube: &ScenarioCube, weights: &[f64]) -> Result<f64> {
        let paths = cube.portfolio_paths(weights)?;
        self.evaluate_paths(&paths)
    }

    /// Risk from S x M accumulated portfolio paths.
    pub fn evaluate_paths(&self, paths: &[Vec<f64>]) -> Result<f64> {
        let terminal: Vec<f64> = paths.iter().filter_map(|p| p.last().copied()).collect();
        match self {
            RiskMeasure::Cvar { eta } => cvar_scenario(&terminal, *eta),
            RiskMeasure::Cdar { eta } => cdar_multi(&drawdown_matrix(paths), *eta),
            RiskMeasure::Variance => {
                check_samples(&terminal)?;
                Ok(crate::stats::pop_std_dev(&terminal))
            }
        }
    }
}
