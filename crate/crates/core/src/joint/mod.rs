//! Joint estimation of per-asset regime-switching GARCH variances and
//! regime-dependent standard MNTS innovations.
//!
//! Steps, in order:
//! 1. regime-switching GARCH with Student-t innovations on the index; its
//!    smoothed hard path is the regime path of the joint residuals
//! 2. common tail parameters per regime from the index residuals
//! 3. regime-switching GARCH per asset, residual extraction
//! 4. per-asset skew per regime with the tail parameters frozen
//! 5. denoised residual correlation per regime
//! 6. implied internal correlation, repaired to be positive definite

mod correlation;
mod report;

pub use correlation::{
    clip_eigenvalues, denoise_correlation, implied_internal_sigma, implied_internal_sigma_raw, nearest_psd,
    regime_conditional_residual_corr, unit_diagonal, Denoised,
};
pub use report::{ks_report, write_diagnostics_csv, write_ks_csv, write_transition_csv, KsRow};

use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ReturnPanel;
use crate::error::{Error, Result};
use crate::garch::{self, FitOptions, InnovationFamily, MrsGarchFit, MrsGarchParams, RegimeCandidate};
use crate::rng;
use crate::tempered_stable::{fit_skew, fit_tail_params, std_gamma, StdMntsParams, SubordinatorParams};

pub const MODEL_SCHEMA: &str = "mrs-mnts-model/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssetRegimes {
    /// Every asset uses the index regime count.
    SameAsIndex,
    /// Each asset selects its own regime count by BIC.
    Own,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct JointConfig {
    pub index_name: String,
    /// Minimum number of return observations.
    pub min_obs: usize,
    /// Fixed index regime count; `None` selects it by BIC.
    pub regimes: Option<usize>,
    pub asset_regimes: AssetRegimes,
    pub innovation: InnovationFamily,
    pub zero_means: bool,
    pub starts: usize,
    pub psd_eps: f64,
    pub denoise: bool,
    pub seed: u64,
}

impl Default for JointConfig {
    fn default() -> Self {
        Self {
            index_name: "index".into(),
            min_obs: 1764,
            regimes: None,
            asset_regimes: AssetRegimes::SameAsIndex,
            innovation: InnovationFamily::StudentT,
            zero_means: false,
            starts: 8,
            psd_eps: 1e-8,
            denoise: true,
            seed: 0,
        }
    }
}

impl JointConfig {
    fn fit_options(&self) -> FitOptions {
        FitOptions { starts: self.starts, zero_means: self.zero_means, ..FitOptions::default() }
    }
}

/// Fitted univariate model of one series with the state needed to start a
/// simulation after the sample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesModel {
    pub name: String,
    pub params: MrsGarchParams,
    pub loglik: f64,
    pub bic: f64,
    pub n_params: usize,
    pub spectral_radius: f64,
    pub bimodality: f64,
    /// Parallel variances for the first period after the sample.
    pub next_sigma2: Vec<f64>,
    /// Smoothed regime probabilities of the last sample period.
    pub last_probs: Vec<f64>,
}

impl SeriesModel {
    fn from_fit(name: &str, f: &MrsGarchFit) -> Self {
        Self {
            name: name.to_string(),
            params: f.params.clone(),
            loglik: f.loglik,
            bic: f.bic,
            n_params: f.n_params,
            spectral_radius: f.spectral_radius,
            bimodality: f.bimodality,
            next_sigma2: f.next_sigma2.clone(),
            last_probs: f.last_probs().to_vec(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegimeNts {
    pub regime: usize,
    pub n_obs: usize,
    pub lambda: f64,
    pub theta: f64,
    pub tail_loss: f64,
    pub small_sample: bool,
    pub nu: Vec<f64>,
    pub gamma: Vec<f64>,
    /// Raw residual correlation.
    pub raw_corr: Vec<Vec<f64>>,
    /// Denoised residual correlation.
    pub sigma_x: Vec<Vec<f64>>,
    /// Internal correlation of the normal component (positive definite).
    pub sigma: Vec<Vec<f64>>,
    /// Frobenius distance between `sigma_x` and the covariance rebuilt from
    /// the repaired `sigma`.
    pub repair_distance: f64,
}

impl RegimeNts {
    pub fn std_mnts(&self) -> Result<StdMntsParams> {
        StdMntsParams::new(self.lambda, self.theta, self.nu.clone(), self.sigma.clone())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Diagnostics {
    pub dates: Vec<String>,
    pub index_path: Vec<usize>,
    pub index_residuals: Vec<f64>,
    /// T x N residuals of the asset fits.
    pub residuals: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointModel {
    pub schema: String,
    pub assets: Vec<String>,
    pub config: JointConfig,
    pub n_obs: usize,
    pub first_date: Option<String>,
    pub last_date: Option<String>,
    pub index: SeriesModel,
    pub regime_selection: Vec<RegimeCandidate>,
    pub asset_models: Vec<SeriesModel>,
    pub regime_counts: Vec<usize>,
    pub regimes: Vec<RegimeNts>,
    pub diagnostics: Diagnostics,
}

impl JointModel {
    pub fn k(&self) -> usize {
        self.index.params.k()
    }

    /// Index transition matrix, which drives the innovation regimes.
    pub fn trans(&self) -> &[Vec<f64>] {
        &self.index.params.trans
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        if model.schema != MODEL_SCHEMA {
            return Err(Error::Parse(format!("unsupported model schema {:?}", model.schema)));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), rows.len(), |i, j| rows[i][j])
}

fn step<T>(n: u8, r: Result<T>) -> Result<T> {
    r.map_err(Error::at_step(n))
}

fn subset(xs: &[f64], path: &[usize], regime: usize) -> Vec<f64> {
    xs.iter().zip(path).filter(|(_, &h)| h == regime).map(|(x, _)| *x).collect()
}

/// Runs the six estimation steps.
pub fn estimate(returns: &ReturnPanel, index_returns: &[f64], config: &JointConfig) -> Result<JointModel> {
    let t_len = returns.len();
    let n = returns.n_assets();
    if index_returns.len() != t_len {
        return Err(Error::Shape(format!("index has {} returns, panel has {t_len}", index_returns.len())));
    }
    if t_len < config.min_obs {
        return Err(Error::InsufficientData(format!("{t_len} observations, window needs {}", config.min_obs)));
    }
    if n == 0 {
        return Err(Error::InsufficientData("panel has no assets".into()));
    }
    let opts = config.fit_options();
    let index_seed = rng::split(config.seed, rng::domain::ASSET_FIT, 0);

    // step 1
    let (index_fit, regime_selection) = step(1, (|| match config.regimes {
        Some(k) => {
            let f = garch::fit_with(index_returns, k, config.innovation, index_seed, &opts)?;
            let cand = RegimeCandidate {
                k,
                n_params: f.n_params,
                loglik: f.loglik,
                bic: f.bic,
                spectral_radius: f.spectral_radius,
                bimodality: f.bimodality,
            };
            Ok((f, vec![cand]))
        }
        None => {
            let sel = garch::select_regime_count(index_returns, config.innovation, index_seed, &opts)?;
            let cands = sel.candidates.clone();
            Ok((sel.into_chosen(), cands))
        }
    })())?;
    let k = index_fit.params.k();
    let path = index_fit.path.hard.clone();
    let regime_counts: Vec<usize> = (0..k).map(|j| path.iter().filter(|&&h| h == j).count()).collect();
    log::info!("index regime counts {regime_counts:?}");

    // step 2
    let tails = step(2, (0..k).map(|j| fit_tail_params(&subset(&index_fit.residuals, &path, j), SubordinatorParams { lambda: 1.0, theta: 1.0 })).collect::<Result<Vec<_>>>())?;

    // steps 3 and 4, parallel across assets
    let per_asset: Vec<Result<(MrsGarchFit, Vec<f64>)>> = (0..n)
        .into_par_iter()
        .map(|a| {
            let series = returns.column(a);
            let seed = rng::split(config.seed, rng::domain::ASSET_FIT, a as u64 + 1);
            let fit = step(3, match config.asset_regimes {
                AssetRegimes::SameAsIndex => garch::fit_with(&series, k, config.innovation, seed, &opts),
                AssetRegimes::Own => garch::select_regime_count(&series, config.innovation, seed, &opts).map(|s| s.into_chosen()),
            })?;
            let nus = step(4, (0..k).map(|j| fit_skew(&subset(&fit.residuals, &path, j), tails[j].lambda, tails[j].theta).map(|s| s.nu)).collect::<Result<Vec<_>>>())?;
            Ok((fit, nus))
        })
        .collect();
    let mut asset_fits = Vec::with_capacity(n);
    let mut nu_by_asset = Vec::with_capacity(n);
    for r in per_asset {
        let (f, nus) = r?;
        asset_fits.push(f);
        nu_by_asset.push(nus);
    }
    let residual_rows: Vec<Vec<f64>> = (0..t_len).map(|t| asset_fits.iter().map(|f| f.residuals[t]).collect()).collect();

    // steps 5 and 6
    let mut regimes = Vec::with_capacity(k);
    for j in 0..k {
        let raw = step(5, regime_conditional_residual_corr(&residual_rows, &path, j))?;
        let sigma_x = if config.denoise { step(5, denoise_correlation(&raw, regime_counts[j]))?.matrix } else { raw.clone() };
        let (lambda, theta) = (tails[j].lambda, tails[j].theta);
        let nu: Vec<f64> = nu_by_asset.iter().map(|v| v[j]).collect();
        let gamma: Vec<f64> = nu.iter().map(|v| std_gamma(lambda, theta, *v)).collect();
        let sigma = step(6, implied_internal_sigma(&sigma_x, lambda, theta, &nu, &gamma, config.psd_eps))?;
        let rebuilt = crate::tempered_stable::covariance_identity(lambda, theta, &nu, &gamma, &sigma);
        let repair_distance = (&rebuilt - &sigma_x).norm();
        regimes.push(RegimeNts {
            regime: j,
            n_obs: regime_counts[j],
            lambda,
            theta,
            tail_loss: tails[j].loss,
            small_sample: tails[j].small_sample,
            nu,
            gamma,
            raw_corr: to_rows(&raw),
            sigma_x: to_rows(&sigma_x),
            sigma: to_rows(&sigma),
            repair_distance,
        });
    }

    let diagnostics = Diagnostics {
        dates: returns.dates.iter().map(|d| d.to_string()).collect(),
        index_path: path,
        index_residuals: index_fit.residuals.clone(),
        residuals: residual_rows,
    };
    Ok(JointModel {
        schema: MODEL_SCHEMA.to_string(),
        assets: returns.assets.clone(),
        config: config.clone(),
        n_obs: t_len,
        first_date: returns.dates.first().map(|d| d.to_string()),
        last_date: returns.dates.last().map(|d| d.to_string()),
        index: SeriesModel::from_fit(&config.index_name, &index_fit),
        regime_selection,
        asset_models: asset_fits.iter().zip(&returns.assets).map(|(f, name)| SeriesModel::from_fit(name, f)).collect(),
        regime_counts,
        regimes,
        diagnostics,
    })
}

/// Frobenius distance between the covariance rebuilt from a regime's
/// parameters and its denoised residual correlation.
pub fn round_trip_distance(r: &RegimeNts) -> f64 {
    let rebuilt = crate::tempered_stable::covariance_identity(r.lambda, r.theta, &r.nu, &r.gamma, &to_matrix(&r.sigma));
    (rebuilt - to_matrix(&r.sigma_x)).norm()
}
