//! Goodness-of-fit and parameter tables.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::JointModel;
use crate::error::{Error, Result};
use crate::garch::Innovation;
use crate::stats;
use crate::tempered_stable::{InversionGrid, StdMntsParams};

/// Below this many residuals a regime's KS entry is left empty.
pub const KS_MIN_OBS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsRow {
    pub asset: String,
    pub regime: usize,
    pub nu: f64,
    pub ks_statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub n: usize,
}

/// Two-sided KS test of each asset's residuals in each regime against the
/// fitted NTS marginal of that regime. `residuals` is T x N, `nts[j]` the
/// parameters of regime `j`.
pub fn ks_report(assets: &[String], residuals: &[Vec<f64>], path: &[usize], nts: &[StdMntsParams]) -> Result<Vec<KsRow>> {
    if residuals.len() != path.len() {
        return Err(Error::Shape("residual rows and regime path differ in length".into()));
    }
    let mut rows = Vec::new();
    for (a, name) in assets.iter().enumerate() {
        for (j, p) in nts.iter().enumerate() {
            if p.dim() != assets.len() {
                return Err(Error::Shape("NTS dimension differs from asset count".into()));
            }
            let xs: Vec<f64> = residuals.iter().zip(path).filter(|(_, &h)| h == j).map(|(r, _)| r[a]).collect();
            let (ks_statistic, p_value) = if xs.len() < KS_MIN_OBS {
                (None, None)
            } else {
                let m = p.marginal(a, InversionGrid::default());
                let d = stats::ks_statistic(&xs, |x| m.cdf(x));
                (Some(d), Some(stats::kolmogorov_sf(d * (xs.len() as f64).sqrt()).clamp(0.0, 1.0)))
            };
            rows.push(KsRow { asset: name.clone(), regime: j, nu: p.nu[a], ks_statistic, p_value, n: xs.len() });
        }
    }
    Ok(rows)
}

impl JointModel {
    pub fn ks_report(&self) -> Result<Vec<KsRow>> {
        let nts = self.regimes.iter().map(|r| r.std_mnts()).collect::<Result<Vec<_>>>()?;
        ks_report(&self.assets, &self.diagnostics.residuals, &self.diagnostics.index_path, &nts)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_ks_csv(path: &Path, rows: &[KsRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["asset", "regime", "nu", "ks_statistic", "p_value", "n"])?;
    for r in rows {
        w.write_record([r.asset.clone(), (r.regime + 1).to_string(), r.nu.to_string(), opt(r.ks_statistic), opt(r.p_value), r.n.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Index transition matrix as `from,to,probability` rows (regimes 1-based).
pub fn write_transition_csv(path: &Path, model: &JointModel) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["from", "to", "probability"])?;
    for (i, row) in model.trans().iter().enumerate() {
        for (j, p) in row.iter().enumerate() {
            w.write_record([(i + 1).to_string(), (j + 1).to_string(), p.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per fitted series: regime count, likelihood, BIC, spectral
/// radius, Student-t degrees of freedom and residual bimodality.
pub fn write_diagnostics_csv(path: &Path, model: &JointModel) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["series", "k", "n_params", "loglik", "bic", "spectral_radius", "df", "bimodality"])?;
    for s in std::iter::once(&model.index).chain(&model.asset_models) {
        let df = match s.params.innovation {
            Innovation::StudentT { df } => df.to_string(),
            Innovation::Normal => String::new(),
        };
        w.write_record([
            s.name.clone(),
            s.params.k().to_string(),
            s.n_params.to_string(),
            s.loglik.to_string(),
            s.bic.to_string(),
            s.spectral_radius.to_string(),
            df,
            s.bimodality.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
