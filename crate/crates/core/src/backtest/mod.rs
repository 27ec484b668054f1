//! Rolling-window out-of-sample backtest.
//!
//! At every rebalance the joint model is refitted on the trailing window,
//! a scenario cube is simulated from the end of the window, one frontier is
//! solved per configured risk measure, and the chosen weights are held for
//! the next `rebalance` periods. Realized returns use constant weights on
//! each period's simple returns.

mod report;

pub use report::{
    export_reports, performance_table, realized_ratio, realized_risk, relative_drawdowns, suboptimal_report, PerformanceRow, PerformanceTable,
    SuboptimalTable, TABLE_MEASURES,
};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::data::ReturnPanel;
use crate::error::{Error, Result};
use crate::joint::{estimate, JointConfig};
use crate::optimizer::{frontier, Frontier, ScenarioSet, WeightBounds, DEFAULT_FLOORS};
use crate::risk::RiskMeasure;
use crate::rng;
use crate::scenario::{simulate, ShockSource, SimulationConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BacktestConfig {
    /// Fit length in periods.
    pub window: usize,
    /// Holding period in periods; must equal `horizon`.
    pub rebalance: usize,
    pub paths: usize,
    pub horizon: usize,
    /// One optimized strategy per measure.
    pub measures: Vec<RiskMeasure>,
    pub floors: Vec<f64>,
    pub bounds: WeightBounds,
    /// Number of suboptimal levels on each side of the optimum.
    pub levels: usize,
    pub seed: u64,
    pub shocks: ShockSource,
    /// Estimation settings; `min_obs` and `seed` are overridden per window.
    pub fit: JointConfig,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            window: 1764,
            rebalance: 10,
            paths: 1000,
            horizon: 10,
            measures: TABLE_MEASURES.to_vec(),
            floors: DEFAULT_FLOORS.to_vec(),
            bounds: WeightBounds::default(),
            levels: 4,
            seed: 0,
            shocks: ShockSource::Coupled,
            fit: JointConfig::default(),
        }
    }
}

impl BacktestConfig {
    pub fn validate(&self, n_assets: usize) -> Result<()> {
        if self.rebalance == 0 || self.rebalance != self.horizon {
            return Err(Error::InvalidParameter(format!(
                "holding period {} must be positive and equal the simulation horizon {}",
                self.rebalance, self.horizon
            )));
        }
        if self.window <= n_assets {
            return Err(Error::InvalidParameter(format!("window {} must exceed the number of assets {n_assets}", self.window)));
        }
        if self.paths == 0 {
            return Err(Error::InvalidParameter("at least one scenario path is required".into()));
        }
        if self.measures.is_empty() {
            return Err(Error::InvalidParameter("no risk measures configured".into()));
        }
        for m in &self.measures {
            m.validate()?;
        }
        self.bounds.validate(n_assets)
    }

    /// Level labels from `L{levels}` up to `H{levels}`.
    pub fn labels(&self) -> Vec<String> {
        let l = self.levels;
        (0..=2 * l).map(|i| crate::optimizer::frontier_label(i, l)).collect()
    }
}

/// Realized per-period returns of one strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyTrack {
    pub name: String,
    /// `None` for benchmarks.
    pub measure: Option<RiskMeasure>,
    pub label: String,
    pub returns: Vec<f64>,
}

/// Weights set at one rebalance for one strategy level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Holding {
    pub rebalance: usize,
    /// Last date of the estimation window.
    pub date: NaiveDate,
    pub strategy: String,
    pub label: String,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RebalanceRecord {
    /// Panel row of the first held period.
    pub start: usize,
    pub end: usize,
    pub date: NaiveDate,
    /// False when the fit or the optimization failed and weights were
    /// carried forward.
    pub fitted: bool,
    pub error: Option<String>,
    pub regimes: Option<usize>,
    pub frontiers: Vec<Frontier>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RealizedTrack {
    pub assets: Vec<String>,
    pub index_name: String,
    /// Dates of the held periods.
    pub dates: Vec<NaiveDate>,
    pub rebalances: Vec<RebalanceRecord>,
    /// Per measure, one track per level label (`Optimal` included).
    pub tracks: Vec<StrategyTrack>,
    /// Index and equal-weight benchmarks.
    pub benchmarks: Vec<StrategyTrack>,
    pub holdings: Vec<Holding>,
    pub labels: Vec<String>,
}

pub const EQUAL_WEIGHT: &str = "Equal Weight";

impl RealizedTrack {
    pub fn track(&self, name: &str, label: &str) -> Option<&StrategyTrack> {
        self.tracks.iter().find(|t| t.name == name && t.label == label)
    }

    /// Optimal tracks followed by the benchmarks.
    pub fn table_rows(&self) -> Vec<&StrategyTrack> {
        self.tracks.iter().filter(|t| t.label == "Optimal").chain(&self.benchmarks).collect()
    }
}

/// Point of a frontier that a level label resolves to, clamped to the ends.
fn resolve(front: &Frontier, offset: isize) -> usize {
    let last = front.points.len() as isize - 1;
    (front.optimal as isize + offset).clamp(0, last) as usize
}

fn dot(w: &[f64], r: &[f64]) -> f64 {
    w.iter().zip(r).map(|(a, b)| a * b).sum()
}

fn fit_window(config: &BacktestConfig, panel: &ReturnPanel, index: &[f64], start: usize, r: usize) -> Result<(usize, Vec<Frontier>)> {
    let lo = start - config.window;
    let train = panel.slice(lo, start);
    let fit = JointConfig { min_obs: config.window, seed: rng::split(config.seed, rng::domain::REBALANCE, 2 * r as u64), ..config.fit.clone() };
    let model = estimate(&train, &index[lo..start], &fit)?;
    let sim = SimulationConfig {
        paths: config.paths,
        horizon: config.horizon,
        seed: rng::split(config.seed, rng::domain::REBALANCE, 2 * r as u64 + 1),
        shocks: config.shocks,
    };
    let cube = simulate(&model, &sim)?;
    let set = ScenarioSet::from_cube(&cube);
    let fronts = config.measures.iter().map(|m| frontier(&set, *m, &config.floors, config.bounds)).collect::<Result<Vec<_>>>()?;
    Ok((model.k(), fronts))
}

/// Runs the rolling backtest. `index` holds the index returns aligned with
/// the panel rows. Only complete holding periods are traded.
pub fn run(config: &BacktestConfig, panel: &ReturnPanel, index: &[f64]) -> Result<RealizedTrack> {
    let n = panel.n_assets();
    config.validate(n)?;
    if index.len() != panel.len() {
        return Err(Error::Shape(format!("index has {} returns, panel has {}", index.len(), panel.len())));
    }
    if panel.len() < config.window + config.rebalance {
        return Err(Error::InsufficientData(format!(
            "{} periods, need window {} plus one holding period {}",
            panel.len(),
            config.window,
            config.rebalance
        )));
    }
    let labels = config.labels();
    let offsets: Vec<isize> = (0..labels.len()).map(|i| i as isize - config.levels as isize).collect();
    let names: Vec<String> = config.measures.iter().map(RiskMeasure::name).collect();
    let mut tracks: Vec<StrategyTrack> = config
        .measures
        .iter()
        .zip(&names)
        .flat_map(|(m, name)| {
            labels.iter().map(move |l| StrategyTrack { name: name.clone(), measure: Some(*m), label: l.clone(), returns: Vec::new() })
        })
        .collect();
    let mut index_track = StrategyTrack { name: config.fit.index_name.clone(), measure: None, label: String::new(), returns: Vec::new() };
    let mut equal = StrategyTrack { name: EQUAL_WEIGHT.into(), measure: None, label: String::new(), returns: Vec::new() };
    let mut current: Vec<Vec<f64>> = vec![vec![1.0 / n as f64; n]; tracks.len()];
    let mut rebalances = Vec::new();
    let mut holdings = Vec::new();
    let mut dates = Vec::new();
    let mut start = config.window;
    let mut r = 0;
    while start + config.rebalance <= panel.len() {
        let end = start + config.rebalance;
        let date = panel.dates[start - 1];
        let mut record = RebalanceRecord { start, end, date, fitted: false, error: None, regimes: None, frontiers: Vec::new() };
        match fit_window(config, panel, index, start, r) {
            Ok((k, fronts)) => {
                for (mi, front) in fronts.iter().enumerate() {
                    for (li, &off) in offsets.iter().enumerate() {
                        current[mi * labels.len() + li] = front.points[resolve(front, off)].weights.clone();
                    }
                }
                record.fitted = true;
                record.regimes = Some(k);
                record.frontiers = fronts;
            }
            Err(e) => {
                log::warn!("rebalance {r} on {date}: {e}; holding previous weights");
                record.error = Some(e.to_string());
            }
        }
        for (track, w) in tracks.iter().zip(&current) {
            holdings.push(Holding { rebalance: r, date, strategy: track.name.clone(), label: track.label.clone(), weights: w.clone() });
        }
        for t in start..end {
            let row = &panel.returns[t];
            for (track, w) in tracks.iter_mut().zip(&current) {
                track.returns.push(dot(w, row));
            }
            index_track.returns.push(index[t]);
            equal.returns.push(row.iter().sum::<f64>() / n as f64);
            dates.push(panel.dates[t]);
        }
        rebalances.push(record);
        start = end;
        r += 1;
    }
    Ok(RealizedTrack {
        assets: panel.assets.clone(),
        index_name: config.fit.index_name.clone(),
        dates,
        rebalances,
        tracks,
        benchmarks: vec![index_track, equal],
        holdings,
        labels,
    })
}
