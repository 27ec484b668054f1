use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{RealizedTrack, StrategyTrack};
use crate::data::accumulate_series;
use crate::error::{Error, Result};
use crate::risk::{cdar_single, cvar_scenario, drawdowns, RiskMeasure};
use crate::stats::pop_std_dev;

/// Ratio columns of the performance tables.
pub const TABLE_MEASURES: [RiskMeasure; 8] = [
    RiskMeasure::Cdar { eta: 0.0 },
    RiskMeasure::Cdar { eta: 0.3 },
    RiskMeasure::Cdar { eta: 0.7 },
    RiskMeasure::Cdar { eta: 1.0 },
    RiskMeasure::Cvar { eta: 0.5 },
    RiskMeasure::Cvar { eta: 0.7 },
    RiskMeasure::Cvar { eta: 0.9 },
    RiskMeasure::Variance,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceRow {
    pub strategy: String,
    pub mean_return: f64,
    pub ratios: Vec<f64>,
    /// Set where the realized risk is zero and the ratio is reported as
    /// a signed infinity.
    pub zero_risk: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceTable {
    pub columns: Vec<RiskMeasure>,
    pub rows: Vec<PerformanceRow>,
}

/// One block of level rows per optimized measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuboptimalTable {
    pub columns: Vec<RiskMeasure>,
    pub blocks: Vec<(String, Vec<PerformanceRow>)>,
}

/// Risk of a realized return path: CVaR of the pooled returns, CDaR of the
/// accumulated path, or the SD of the returns.
pub fn realized_risk(returns: &[f64], measure: &RiskMeasure) -> Result<f64> {
    match measure {
        RiskMeasure::Cvar { eta } => cvar_scenario(returns, *eta),
        RiskMeasure::Cdar { eta } => cdar_single(&drawdowns(&accumulate_series(returns)), *eta),
        RiskMeasure::Variance => {
            if returns.is_empty() {
                return Err(Error::InsufficientData("empty return path".into()));
            }
            Ok(pop_std_dev(returns))
        }
    }
}

/// Mean return over realized risk, and whether the risk was zero.
pub fn realized_ratio(returns: &[f64], measure: &RiskMeasure) -> Result<(f64, bool)> {
    let risk = realized_risk(returns, measure)?;
    let mean = returns.iter().sum::<f64>() / returns.len() as f64;
    if risk.abs() <= 1e-15 {
        let r = if mean == 0.0 { 0.0 } else { f64::INFINITY.copysign(mean) };
        return Ok((r, true));
    }
    Ok((mean / risk, false))
}

fn row(track: &StrategyTrack, name: String, measures: &[RiskMeasure]) -> Result<PerformanceRow> {
    if track.returns.is_empty() {
        return Err(Error::InsufficientData(format!("track {name} has no realized returns")));
    }
    let mean_return = track.returns.iter().sum::<f64>() / track.returns.len() as f64;
    let (ratios, zero_risk) = measures.iter().map(|m| realized_ratio(&track.returns, m)).collect::<Result<Vec<_>>>()?.into_iter().unzip();
    Ok(PerformanceRow { strategy: name, mean_return, ratios, zero_risk })
}

/// Realized performance ratios of the optimal strategies and the benchmarks.
pub fn performance_table(track: &RealizedTrack, measures: &[RiskMeasure]) -> Result<PerformanceTable> {
    let rows = track.table_rows().into_iter().map(|t| row(t, t.name.clone(), measures)).collect::<Result<_>>()?;
    Ok(PerformanceTable { columns: measures.to_vec(), rows })
}

/// Realized ratios of every level, per optimized measure.
pub fn suboptimal_report(track: &RealizedTrack, measures: &[RiskMeasure]) -> Result<SuboptimalTable> {
    let mut blocks: Vec<(String, Vec<PerformanceRow>)> = Vec::new();
    for t in &track.tracks {
        let r = row(t, t.label.clone(), measures)?;
        match blocks.last_mut() {
            Some((name, rows)) if *name == t.name => rows.push(r),
            _ => blocks.push((t.name.clone(), vec![r])),
        }
    }
    Ok(SuboptimalTable { columns: measures.to_vec(), blocks })
}

fn flags(r: &PerformanceRow, columns: &[RiskMeasure]) -> String {
    columns.iter().zip(&r.zero_risk).filter(|(_, z)| **z).map(|(m, _)| m.name()).collect::<Vec<_>>().join(";")
}

fn row_record(r: &PerformanceRow, columns: &[RiskMeasure]) -> Vec<String> {
    let mut rec = vec![r.mean_return.to_string()];
    rec.extend(r.ratios.iter().map(|v| v.to_string()));
    rec.push(flags(r, columns));
    rec
}

fn ratio_header(columns: &[RiskMeasure]) -> Vec<String> {
    let mut h = vec!["mean_return".to_string()];
    h.extend(columns.iter().map(RiskMeasure::name));
    h.push("zero_risk".into());
    h
}

impl PerformanceTable {
    /// `strategy,mean_return,<measure>...,zero_risk`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["strategy".to_string()];
        header.extend(ratio_header(&self.columns));
        out.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.strategy.clone()];
            rec.extend(row_record(r, &self.columns));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

impl SuboptimalTable {
    /// `measure,label,mean_return,<measure>...,zero_risk`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["measure".to_string(), "label".into()];
        header.extend(ratio_header(&self.columns));
        out.write_record(&header)?;
        for (name, rows) in &self.blocks {
            for r in rows {
                let mut rec = vec![name.clone(), r.strategy.clone()];
                rec.extend(row_record(r, &self.columns));
                out.write_record(&rec)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// `1 - W_t / max(1, W_1..W_t)` on compounded wealth.
pub fn relative_drawdowns(returns: &[f64]) -> Vec<f64> {
    let mut wealth = 1.0;
    let mut peak = 1.0f64;
    returns
        .iter()
        .map(|r| {
            wealth *= 1.0 + r;
            peak = peak.max(wealth);
            1.0 - wealth / peak
        })
        .collect()
}

fn log_wealth(returns: &[f64]) -> Vec<f64> {
    returns
        .iter()
        .scan(0.0, |s, r| {
            *s += (1.0 + r).ln();
            Some(*s)
        })
        .collect()
}

fn create(dir: &Path, name: &str, written: &mut Vec<PathBuf>) -> Result<csv::Writer<BufWriter<File>>> {
    let path = dir.join(name);
    let w = csv::Writer::from_writer(BufWriter::new(File::create(&path)?));
    written.push(path);
    Ok(w)
}

fn write_series(dir: &Path, name: &str, track: &RealizedTrack, f: impl Fn(&[f64]) -> Vec<f64>, written: &mut Vec<PathBuf>) -> Result<()> {
    let rows = track.table_rows();
    let cols: Vec<Vec<f64>> = rows.iter().map(|t| f(&t.returns)).collect();
    let mut out = create(dir, name, written)?;
    let mut header = vec!["date".to_string()];
    header.extend(rows.iter().map(|t| t.name.clone()));
    out.write_record(&header)?;
    for (i, d) in track.dates.iter().enumerate() {
        let mut rec = vec![d.to_string()];
        rec.extend(cols.iter().map(|c| c[i].to_string()));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes the performance tables and plot-ready series into `dir`:
/// `performance.csv`, `suboptimal.csv`, `wealth.csv` (log wealth),
/// `drawdown.csv` (relative drawdown), `returns.csv`, `weights.csv` and
/// `rebalances.csv`. Returns the written paths.
pub fn export_reports(track: &RealizedTrack, dir: &Path, measures: &[RiskMeasure]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let path = dir.join("performance.csv");
    performance_table(track, measures)?.write_csv(BufWriter::new(File::create(&path)?))?;
    written.push(path);
    let path = dir.join("suboptimal.csv");
    suboptimal_report(track, measures)?.write_csv(BufWriter::new(File::create(&path)?))?;
    written.push(path);
    write_series(dir, "wealth.csv", track, log_wealth, &mut written)?;
    write_series(dir, "drawdown.csv", track, relative_drawdowns, &mut written)?;
    write_series(dir, "returns.csv", track, |r| r.to_vec(), &mut written)?;

    let mut out = create(dir, "weights.csv", &mut written)?;
    let mut header = vec!["rebalance".to_string(), "date".into(), "strategy".into(), "label".into()];
    header.extend(track.assets.iter().cloned());
    out.write_record(&header)?;
    for h in &track.holdings {
        let mut rec = vec![h.rebalance.to_string(), h.date.to_string(), h.strategy.clone(), h.label.clone()];
        rec.extend(h.weights.iter().map(|v| v.to_string()));
        out.write_record(&rec)?;
    }
    out.flush()?;

    let mut out = create(dir, "rebalances.csv", &mut written)?;
    out.write_record(["rebalance", "date", "first_held", "last_held", "fitted", "regimes", "error"])?;
    for (i, r) in track.rebalances.iter().enumerate() {
        let first = track.dates[track.rebalances[..i].iter().map(|x| x.end - x.start).sum::<usize>()];
        let last = track.dates[track.rebalances[..=i].iter().map(|x| x.end - x.start).sum::<usize>() - 1];
        out.write_record([
            i.to_string(),
            r.date.to_string(),
            first.to_string(),
            last.to_string(),
            r.fitted.to_string(),
            r.regimes.map_or(String::new(), |k| k.to_string()),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_positive_path_has_no_drawdown() {
        let r = [0.01; 12];
        for eta in [0.0, 0.3, 0.7, 1.0] {
            let (v, z) = realized_ratio(&r, &RiskMeasure::Cdar { eta }).unwrap();
            assert!(z && v == f64::INFINITY);
        }
        let (v, z) = realized_ratio(&r, &RiskMeasure::Variance).unwrap();
        assert!(z && v == f64::INFINITY);
    }

    #[test]
    fn losing_path_has_negative_ratios() {
        let r = [-0.01, -0.02, -0.005, -0.03, -0.01];
        for m in TABLE_MEASURES {
            let (v, _) = realized_ratio(&r, &m).unwrap();
            assert!(v < 0.0, "{} gives {v}", m.name());
        }
    }

    #[test]
    fn relative_drawdown_on_compounded_wealth() {
        let dd = relative_drawdowns(&[0.1, -0.5, 0.2]);
        assert_eq!(dd[0], 0.0);
        assert!((dd[1] - 0.5).abs() < 1e-15);
        assert!((dd[2] - 0.4).abs() < 1e-15);
    }
}
