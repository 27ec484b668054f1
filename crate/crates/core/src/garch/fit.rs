//! Multi-start maximum-likelihood fitting and regime-count selection.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::filter::{filter, loglik_from, smooth, RegimePath};
use super::{stationarity_spectral_radius, Innovation, MrsGarchParams};
use crate::error::{Error, Result};
use crate::optim::{from_interval, logistic, logit, to_interval, Bfgs};
use crate::{rng, stats};

const PERSISTENCE_CAP: f64 = 0.9999;
const LOG_DF_EXCESS: (f64, f64) = (-2.995_732_273_553_991, 5.288_267_030_694_535); // df - 2 in [0.05, 198]

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnovationFamily {
    Normal,
    StudentT,
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub starts: usize,
    pub zero_means: bool,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { starts: 8, zero_means: false, max_iter: 200 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MrsGarchFit {
    pub params: MrsGarchParams,
    pub path: RegimePath,
    /// `(r_t - eta_h) / sigma_{h,t}` along the hard regime path.
    pub residuals: Vec<f64>,
    pub loglik: f64,
    pub bic: f64,
    pub n_params: usize,
    pub spectral_radius: f64,
    /// Parallel variances for the period after the sample.
    pub next_sigma2: Vec<f64>,
    /// Bimodality coefficient of the residuals (diagnostic).
    pub bimodality: f64,
    pub converged_starts: usize,
}

impl MrsGarchFit {
    pub fn last_probs(&self) -> &[f64] {
        self.path.probs.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

struct Layout {
    k: usize,
    zero_means: bool,
    family: InnovationFamily,
}

impl Layout {
    fn len(&self) -> usize {
        let means = if self.zero_means { 0 } else { self.k };
        means + 3 * self.k + self.k * (self.k - 1) + usize::from(self.family == InnovationFamily::StudentT)
    }

    fn decode(&self, v: &[f64]) -> MrsGarchParams {
        let k = self.k;
        let mut at = 0;
        let eta = if self.zero_means {
            vec![0.0; k]
        } else {
            at = k;
            v[..k].to_vec()
        };
        let (mut omega, mut alpha, mut beta) = (vec![0.0; k], vec![0.0; k], vec![0.0; k]);
        for j in 0..k {
            let var = v[at].exp();
            let s = PERSISTENCE_CAP * logistic(v[at + 1]);
            let share = logistic(v[at + 2]);
            omega[j] = var * (1.0 - s);
            alpha[j] = s * share;
            beta[j] = s - alpha[j];
            at += 3;
        }
        let mut trans = vec![vec![0.0; k]; k];
        for (i, row) in trans.iter_mut().enumerate() {
            let mut logits = vec![0.0; k];
            for (j, l) in logits.iter_mut().enumerate() {
                if j != i {
                    *l = v[at];
                    at += 1;
                }
            }
            let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
            let s: f64 = e.iter().sum();
            for j in 0..k {
                row[j] = e[j] / s;
            }
            // exact row sums
            let off: f64 = (0..k).filter(|&j| j != i).map(|j| row[j]).sum();
            row[i] = 1.0 - off;
        }
        let innovation = match self.family {
            InnovationFamily::Normal => Innovation::Normal,
            InnovationFamily::StudentT => Innovation::StudentT { df: 2.0 + to_interval(v[at], LOG_DF_EXCESS.0, LOG_DF_EXCESS.1).exp() },
        };
        MrsGarchParams { eta, omega, alpha, beta, trans, innovation }
    }

    fn random_start(&self, rng: &mut impl Rng, mean: f64) -> Vec<f64> {
        let k = self.k;
        let mut v = Vec::with_capacity(self.len());
        if !self.zero_means {
            for _ in 0..k {
                v.push(mean + rng.random_range(-0.05..0.05));
            }
        }
        let mut vars: Vec<f64> = (0..k).map(|_| rng.random_range(0.3f64.ln()..3f64.ln())).collect();
        vars.sort_by(f64::total_cmp);
        for lv in vars {
            let s: f64 = rng.random_range(0.85..0.99);
            let share: f64 = rng.random_range(0.03..0.2);
            v.push(lv);
            v.push(logit(s / PERSISTENCE_CAP));
            v.push(logit(share));
        }
        for _ in 0..k {
            let stay: f64 = rng.random_range(0.8..0.98);
            let off = (1.0 - stay) / (k - 1) as f64;
            for _ in 0..k - 1 {
                v.push((off / stay).ln());
            }
        }
        if self.family == InnovationFamily::StudentT {
            let df: f64 = rng.random_range(4.0..10.0);
            v.push(from_interval((df - 2.0).ln(), LOG_DF_EXCESS.0, LOG_DF_EXCESS.1));
        }
        v
    }
}

fn scaled(p: &MrsGarchParams, scale: f64) -> MrsGarchParams {
    MrsGarchParams {
        eta: p.eta.iter().map(|e| e * scale).collect(),
        omega: p.omega.iter().map(|w| w * scale * scale).collect(),
        ..p.clone()
    }
}

/// Fits a `k`-regime model with default options.
pub fn fit(returns: &[f64], k: usize, family: InnovationFamily, seed: u64) -> Result<MrsGarchFit> {
    fit_with(returns, k, family, seed, &FitOptions::default())
}

pub fn fit_with(returns: &[f64], k: usize, family: InnovationFamily, seed: u64, opts: &FitOptions) -> Result<MrsGarchFit> {
    if !(1..=3).contains(&k) {
        return Err(Error::InvalidParameter(format!("regime count must be 1..=3, got {k}")));
    }
    if returns.len() < 10 * k {
        log::warn!("fitting {k} regimes to only {} returns", returns.len());
    }
    if returns.len() < 3 {
        return Err(Error::InsufficientData("fit needs at least 3 returns".into()));
    }
    let sd = stats::std_dev(returns);
    if !(sd > 0.0 && sd.is_finite()) {
        return Err(Error::InvalidParameter("returns have zero or non-finite dispersion".into()));
    }
    let z: Vec<f64> = returns.iter().map(|r| r / sd).collect();
    let mean = stats::mean(&z);
    let layout = Layout { k, zero_means: opts.zero_means, family };
    let t_len = z.len() as f64;
    let objective = |v: &[f64]| {
        let p = layout.decode(v);
        if v.iter().any(|x| !x.is_finite()) || stationarity_spectral_radius(&p) >= 1.0 {
            return f64::INFINITY;
        }
        let ll = loglik_from(&p, &z, &p.stationary_distribution(), &p.initial_variance(1.0));
        if ll.is_finite() {
            -ll / t_len
        } else {
            f64::INFINITY
        }
    };
    let bfgs = Bfgs { max_iter: opts.max_iter, g_tol: 1e-6, f_tol: 1e-11, fd_step: 1e-5 };
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut converged_starts = 0;
    for start in 0..opts.starts.max(1) {
        let mut r = rng::stream(seed, rng::domain::GARCH_START, start as u64);
        let x0 = layout.random_start(&mut r, mean);
        let m = bfgs.minimize(objective, &x0);
        if !m.f.is_finite() {
            continue;
        }
        converged_starts += usize::from(m.converged);
        if best.as_ref().is_none_or(|b| m.f < b.1) {
            best = Some((m.x, m.f));
        }
    }
    let Some((x, _)) = best else {
        return Err(Error::NoConvergence(format!("all {} starts failed for k = {k}", opts.starts)));
    };
    let fitted = scaled(&layout.decode(&x), sd);
    let params = fitted.permuted(&fitted.canonical_order());
    let rho = stationarity_spectral_radius(&params);
    if rho >= 1.0 {
        return Err(Error::NonStationary(rho));
    }
    let out = filter(&params, returns)?;
    let path = smooth(&params, &out);
    let residuals: Vec<f64> =
        path.hard.iter().enumerate().map(|(t, &h)| (returns[t] - params.eta[h]) / out.sigma2[t][h].sqrt()).collect();
    let n_params = layout.len();
    let bic = 2.0 * out.loglik - n_params as f64 * t_len.ln();
    let bimodality = stats::bimodality_coefficient(&residuals);
    Ok(MrsGarchFit {
        params,
        path,
        residuals,
        loglik: out.loglik,
        bic,
        n_params,
        spectral_radius: rho,
        next_sigma2: out.next_sigma2,
        bimodality,
        converged_starts,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegimeCandidate {
    pub k: usize,
    pub n_params: usize,
    pub loglik: f64,
    pub bic: f64,
    pub spectral_radius: f64,
    pub bimodality: f64,
}

#[derive(Debug, Clone)]
pub struct RegimeSelection {
    pub chosen: usize,
    pub candidates: Vec<RegimeCandidate>,
    pub fits: Vec<MrsGarchFit>,
}

impl RegimeSelection {
    pub fn chosen_fit(&self) -> &MrsGarchFit {
        self.fits.iter().find(|f| f.params.k() == self.chosen).expect("chosen fit present")
    }

    pub fn into_chosen(self) -> MrsGarchFit {
        let k = self.chosen;
        self.fits.into_iter().find(|f| f.params.k() == k).expect("chosen fit present")
    }
}

/// Fits k = 1, 2, 3 and keeps the highest `2 loglik - p ln T`; ties go to
/// the smaller k. A k whose fit fails is logged and left out.
pub fn select_regime_count(returns: &[f64], family: InnovationFamily, seed: u64, opts: &FitOptions) -> Result<RegimeSelection> {
    let mut fits = Vec::new();
    let mut last_err = None;
    for k in 1..=3 {
        match fit_with(returns, k, family, seed, opts) {
            Ok(f) => fits.push(f),
            Err(e) => {
                log::warn!("{k}-regime fit failed: {e}");
                last_err = Some(e);
            }
        }
    }
    if fits.is_empty() {
        return Err(last_err.expect("at least one error"));
    }
    let mut chosen = &fits[0];
    for f in &fits[1..] {
        if f.bic > chosen.bic {
            chosen = f;
        }
    }
    let chosen = chosen.params.k();
    let candidates = fits
        .iter()
        .map(|f| RegimeCandidate {
            k: f.params.k(),
            n_params: f.n_params,
            loglik: f.loglik,
            bic: f.bic,
            spectral_radius: f.spectral_radius,
            bimodality: f.bimodality,
        })
        .collect();
    Ok(RegimeSelection { chosen, candidates, fits })
}

/// Writes the regime-count comparison table as CSV.
pub fn write_selection_csv(path: &Path, selection: &RegimeSelection) -> Result<()> {
    write_candidates_csv(path, &selection.candidates, selection.chosen)
}

/// `k,n_params,loglik,bic,spectral_radius,bimodality,chosen`.
pub fn write_candidates_csv(path: &Path, candidates: &[RegimeCandidate], chosen: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["k", "n_params", "loglik", "bic", "spectral_radius", "bimodality", "chosen"])?;
    for c in candidates {
        w.write_record([
            c.k.to_string(),
            c.n_params.to_string(),
            c.loglik.to_string(),
            c.bic.to_string(),
            c.spectral_radius.to_string(),
            c.bimodality.to_string(),
            (c.k == chosen).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
