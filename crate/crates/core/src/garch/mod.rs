//! Markov-regime-switching GARCH(1,1) with parallel per-regime variances.
//!
//! Every regime carries its own GARCH(1,1) variance and all of them are
//! updated each period from the same realized shock. The regime chain only
//! decides which of the parallel variances is realized.

mod filter;
mod fit;

pub use filter::{filter, loglik, smooth, FilterOutput, RegimePath};
pub use fit::{fit, fit_with, select_regime_count, write_candidates_csv, write_selection_csv, FitOptions, InnovationFamily, MrsGarchFit, RegimeCandidate, RegimeSelection};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::rng;

/// Standardized (zero mean, unit variance) innovation distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Innovation {
    Normal,
    StudentT { df: f64 },
}

impl Innovation {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Innovation::Normal => Ok(()),
            Innovation::StudentT { df } if df.is_finite() && df > 2.0 => Ok(()),
            Innovation::StudentT { df } => Err(Error::InvalidParameter(format!("student-t df must exceed 2, got {df}"))),
        }
    }

    /// Returns a closure evaluating the log density at a standardized value.
    pub fn log_density(&self) -> impl Fn(f64) -> f64 {
        let (df, c) = match *self {
            Innovation::Normal => (f64::INFINITY, -0.5 * (2.0 * std::f64::consts::PI).ln()),
            Innovation::StudentT { df } => (
                df,
                ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0) - 0.5 * (std::f64::consts::PI * (df - 2.0)).ln(),
            ),
        };
        move |z: f64| {
            if df.is_infinite() {
                c - 0.5 * z * z
            } else {
                c - 0.5 * (df + 1.0) * (z * z / (df - 2.0)).ln_1p()
            }
        }
    }

    pub fn cdf(&self, z: f64) -> f64 {
        use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
        match *self {
            Innovation::Normal => Normal::standard().cdf(z),
            Innovation::StudentT { df } => {
                let t = StudentsT::new(0.0, 1.0, df).expect("validated df");
                t.cdf(z * (df / (df - 2.0)).sqrt())
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Innovation::Normal => StandardNormal.sample(rng),
            Innovation::StudentT { df } => {
                let t: f64 = StudentT::new(df).expect("validated df").sample(rng);
                t * ((df - 2.0) / df).sqrt()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrsGarchParams {
    pub eta: Vec<f64>,
    pub omega: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// Row-stochastic: `trans[i][j] = P(next = j | current = i)`.
    pub trans: Vec<Vec<f64>>,
    pub innovation: Innovation,
}

impl MrsGarchParams {
    pub fn k(&self) -> usize {
        self.omega.len()
    }

    /// Single-regime GARCH(1,1).
    pub fn single(eta: f64, omega: f64, alpha: f64, beta: f64, innovation: Innovation) -> Self {
        Self { eta: vec![eta], omega: vec![omega], alpha: vec![alpha], beta: vec![beta], trans: vec![vec![1.0]], innovation }
    }

    /// Checks shapes, coefficient signs and row-stochasticity. Irreducibility
    /// and stationarity are checked separately.
    pub fn validate_basic(&self) -> Result<()> {
        let k = self.k();
        if !(1..=3).contains(&k) {
            return Err(Error::InvalidParameter(format!("regime count must be 1..=3, got {k}")));
        }
        if self.eta.len() != k || self.alpha.len() != k || self.beta.len() != k || self.trans.len() != k {
            return Err(Error::Shape("regime vectors must all have length k".into()));
        }
        for j in 0..k {
            if !(self.omega[j] > 0.0 && self.omega[j].is_finite()) {
                return Err(Error::InvalidParameter(format!("omega[{j}] must be positive")));
            }
            if !(self.alpha[j] >= 0.0 && self.beta[j] >= 0.0 && self.eta[j].is_finite()) {
                return Err(Error::InvalidParameter(format!("alpha[{j}], beta[{j}] must be non-negative")));
            }
        }
        for (i, row) in self.trans.iter().enumerate() {
            if row.len() != k {
                return Err(Error::Shape("transition matrix must be k x k".into()));
            }
            if row.iter().any(|p| !(*p >= 0.0)) {
                return Err(Error::InvalidParameter(format!("negative transition probability in row {i}")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!("transition row {i} sums to {s}")));
            }
        }
        self.innovation.validate()
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_basic()?;
        if !is_irreducible(&self.trans) {
            return Err(Error::InvalidParameter("transition matrix is not irreducible".into()));
        }
        let rho = stationarity_spectral_radius(self);
        if rho >= 1.0 {
            return Err(Error::NonStationary(rho));
        }
        Ok(())
    }

    /// Per-regime unconditional variance `omega / (1 - alpha - beta)`;
    /// infinite when the regime is not covariance stationary on its own.
    pub fn unconditional_variance(&self) -> Vec<f64> {
        (0..self.k())
            .map(|j| {
                let p = self.alpha[j] + self.beta[j];
                if p < 1.0 {
                    self.omega[j] / (1.0 - p)
                } else {
                    f64::INFINITY
                }
            })
            .collect()
    }

    pub fn stationary_distribution(&self) -> Vec<f64> {
        stationary_distribution(&self.trans)
    }

    /// Default starting variances: unconditional per-regime variance, or
    /// `fallback` for regimes that are not stationary on their own.
    pub fn initial_variance(&self, fallback: f64) -> Vec<f64> {
        self.unconditional_variance().into_iter().map(|v| if v.is_finite() { v } else { fallback }).collect()
    }

    /// Relabels regimes so that `order[new] = old`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let pick = |v: &[f64]| order.iter().map(|&o| v[o]).collect::<Vec<_>>();
        Self {
            eta: pick(&self.eta),
            omega: pick(&self.omega),
            alpha: pick(&self.alpha),
            beta: pick(&self.beta),
            trans: order.iter().map(|&i| order.iter().map(|&j| self.trans[i][j]).collect()).collect(),
            innovation: self.innovation,
        }
    }

    /// Regime order sorting unconditional variance ascending.
    pub fn canonical_order(&self) -> Vec<usize> {
        let v = self.unconditional_variance();
        let mut order: Vec<usize> = (0..self.k()).collect();
        order.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
        order
    }

    /// Simulates `len` periods. Returns `(returns, regimes, realized variances)`.
    pub fn simulate(&self, len: usize, seed: u64) -> Result<(Vec<f64>, Vec<usize>, Vec<f64>)> {
        self.validate()?;
        let mut rng = rng::from_seed(seed);
        let pi = self.stationary_distribution();
        let mut state = draw_categorical(&pi, rng.random::<f64>());
        let mut sigma2 = self.initial_variance(1.0);
        let mut returns = Vec::with_capacity(len);
        let mut regimes = Vec::with_capacity(len);
        let mut realized = Vec::with_capacity(len);
        for t in 0..len {
            if t > 0 {
                state = draw_categorical(&self.trans[state], rng.random::<f64>());
            }
            let eps = self.innovation.sample(&mut rng);
            let u = sigma2[state].sqrt() * eps;
            returns.push(self.eta[state] + u);
            regimes.push(state);
            realized.push(sigma2[state]);
            sigma2 = recurse_variance(&sigma2, u, self)?;
        }
        Ok((returns, regimes, realized))
    }
}

/// Index drawn from a discrete distribution by inversion of a uniform.
pub fn draw_categorical(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(probs.len() - 1)
}

/// One step of the parallel variance recursion
/// `sigma2_t = omega + alpha u_{t-1}^2 + beta * sigma2_{t-1}` with the same
/// shock shared by every regime.
pub fn recurse_variance(state: &[f64], u_prev: f64, params: &MrsGarchParams) -> Result<Vec<f64>> {
    if state.len() != params.k() {
        return Err(Error::Shape(format!("state has {} entries, model has {} regimes", state.len(), params.k())));
    }
    if !u_prev.is_finite() || state.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidParameter("non-finite variance state or shock".into()));
    }
    if state.iter().any(|s| *s <= 0.0) {
        return Err(Error::InvalidParameter("variance state must be positive".into()));
    }
    let u2 = u_prev * u_prev;
    Ok((0..params.k()).map(|j| params.omega[j] + params.alpha[j] * u2 + params.beta[j] * state[j]).collect())
}

/// The `k^2 x k^2` block matrix whose spectral radius governs covariance
/// stationarity. Block `(j, i)` is `P(i -> j) (diag(beta) + alpha e_i^T)`.
pub fn stationarity_matrix(params: &MrsGarchParams) -> DMatrix<f64> {
    let k = params.k();
    let mut m = DMatrix::zeros(k * k, k * k);
    for j in 0..k {
        for i in 0..k {
            let p = params.trans[i][j];
            for r in 0..k {
                m[(j * k + r, i * k + r)] += p * params.beta[r];
                m[(j * k + r, i * k + i)] += p * params.alpha[r];
            }
        }
    }
    m
}

pub fn stationarity_spectral_radius(params: &MrsGarchParams) -> f64 {
    let m = stationarity_matrix(params);
    if m.nrows() == 1 {
        return m[(0, 0)].abs();
    }
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn is_irreducible(trans: &[Vec<f64>]) -> bool {
    let k = trans.len();
    (0..k).all(|start| {
        let mut seen = vec![false; k];
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(i) = stack.pop() {
            for j in 0..k {
                if trans[i][j] > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.iter().all(|s| *s)
    })
}

/// Stationary distribution of a row-stochastic matrix. Falls back to the
/// uniform distribution when the linear system is singular.
pub fn stationary_distribution(trans: &[Vec<f64>]) -> Vec<f64> {
    let k = trans.len();
    if k == 1 {
        return vec![1.0];
    }
    let mut a = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            a[(i, j)] = trans[j][i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..k {
        a[(k - 1, j)] = 1.0;
    }
    let mut b = nalgebra::DVector::zeros(k);
    b[k - 1] = 1.0;
    match a.lu().solve(&b) {
        Some(x) if x.iter().all(|v| v.is_finite() && *v >= -1e-12) => {
            let s: f64 = x.iter().map(|v| v.max(0.0)).sum();
            x.iter().map(|v| v.max(0.0) / s).collect()
        }
        _ => vec![1.0 / k as f64; k],
    }
}
