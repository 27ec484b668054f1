//! Command-line front end: `ingest`, `fit`, `simulate`, `risk`, `optimize`,
//! `backtest` and `report`. Every command writes a JSON run manifest.

pub mod manifest;

use std::ffi::OsString;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use manifest::ManifestBuilder;
use mrsmnts::backtest::{self, BacktestConfig, TABLE_MEASURES};
use mrsmnts::data::{self, PricePanel, PriceSchema, ReturnPanel};
use mrsmnts::garch::{write_candidates_csv, InnovationFamily};
use mrsmnts::joint::{self, AssetRegimes, JointConfig, JointModel};
use mrsmnts::optimizer::{frontier, ScenarioSet, WeightBounds, DEFAULT_FLOORS};
use mrsmnts::risk::{drawdowns, RiskMeasure};
use mrsmnts::scenario::{simulate, ScenarioCube, ShockSource, SimulationConfig};

#[derive(Debug, Parser, Serialize)]
#[command(name = "mrsmnts", version, about = "Regime-switching NTS scenario models and tail-risk allocation")]
pub struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Where to write the run manifest (default: next to the main output).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Read a price file and write the simple-return panel.
    Ingest(IngestArgs),
    /// Estimate the joint model on a price panel.
    Fit(FitArgs),
    /// Simulate a scenario cube from a fitted model.
    Simulate(SimulateArgs),
    /// Evaluate a risk measure for fixed weights on a cube.
    Risk(RiskArgs),
    /// Solve the efficient frontier for one risk measure on a cube.
    Optimize(OptimizeArgs),
    /// Run the rolling-window backtest.
    Backtest(BacktestArgs),
    /// Write the KS, transition, diagnostics and selection tables of a model.
    Report(ReportArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct PriceArgs {
    /// Price CSV: `date` column followed by one column per asset.
    #[arg(long)]
    pub prices: PathBuf,
    /// Asset columns to keep, comma separated (default: all).
    #[arg(long, value_delimiter = ',')]
    pub columns: Option<Vec<String>>,
    #[arg(long, default_value = "date")]
    pub date_column: String,
}

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    #[command(flatten)]
    pub input: PriceArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
pub enum Innovation {
    T,
    Normal,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
pub enum AssetRegimeChoice {
    Same,
    Own,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: PriceArgs,
    /// Index column of the price file, or a separate index price file.
    #[arg(long)]
    pub index: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Fixed regime count (default: chosen by BIC).
    #[arg(long)]
    pub regimes: Option<usize>,
    #[arg(long, value_enum, default_value = "same")]
    pub asset_regimes: AssetRegimeChoice,
    #[arg(long, value_enum, default_value = "t")]
    pub innovation: Innovation,
    #[arg(long, default_value_t = 8)]
    pub starts: usize,
    #[arg(long, default_value_t = 1764)]
    pub min_obs: usize,
    #[arg(long)]
    pub zero_means: bool,
    #[arg(long)]
    pub no_denoise: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the report tables into this directory.
    #[arg(long)]
    pub reports: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
pub enum Shocks {
    Coupled,
    Normal,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub paths: usize,
    #[arg(long, default_value_t = 10)]
    pub horizon: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "coupled")]
    pub shocks: Shocks,
    /// Also export the cube as long-format CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
pub enum MeasureKind {
    Cvar,
    Cdar,
    Variance,
}

#[derive(Debug, Args, Serialize)]
pub struct MeasureArgs {
    #[arg(long, value_enum)]
    pub measure: MeasureKind,
    /// Confidence level (CVaR in (0,1), CDaR in [0,1]).
    #[arg(long)]
    pub eta: Option<f64>,
}

impl MeasureArgs {
    fn measure(&self) -> Result<RiskMeasure> {
        let need = || self.eta.ok_or_else(|| anyhow!("--eta is required for --measure {}", self.measure.to_possible_value().map_or_else(String::new, |v| v.get_name().to_string())));
        let m = match self.measure {
            MeasureKind::Cvar => RiskMeasure::Cvar { eta: need()? },
            MeasureKind::Cdar => RiskMeasure::Cdar { eta: need()? },
            MeasureKind::Variance => RiskMeasure::Variance,
        };
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Args, Serialize)]
pub struct RiskArgs {
    #[arg(long)]
    pub cube: PathBuf,
    /// Weights CSV with `asset,weight` rows.
    #[arg(long)]
    pub weights: PathBuf,
    #[command(flatten)]
    pub measure: MeasureArgs,
    /// Write the drawdown series of every path here.
    #[arg(long)]
    pub dd_out: Option<PathBuf>,
}

fn parse_box(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or("expected LO:HI")?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("bad lower bound: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("bad upper bound: {e}"))?;
    Ok((lo, hi))
}

/// Return floors of a frontier.
#[derive(Debug, Clone, Serialize)]
pub struct Floors(pub Vec<f64>);

fn parse_floors(s: &str) -> Result<Floors, String> {
    if s == "default" {
        return Ok(Floors(DEFAULT_FLOORS.to_vec()));
    }
    s.split(',').map(|v| v.trim().parse::<f64>().map_err(|e| format!("bad floor {v:?}: {e}"))).collect::<Result<_, _>>().map(Floors)
}

#[derive(Debug, Args, Serialize)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub cube: PathBuf,
    #[command(flatten)]
    pub measure: MeasureArgs,
    /// `default` or a comma-separated ascending list.
    #[arg(long, default_value = "default", value_parser = parse_floors, allow_hyphen_values = true)]
    pub floors: Floors,
    /// Per-asset weight bounds `LO:HI`.
    #[arg(long = "box", default_value = "0.01:0.15", value_parser = parse_box, allow_hyphen_values = true)]
    pub bounds: (f64, f64),
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct BacktestArgs {
    /// Backtest configuration (TOML, or JSON with a `.json` extension).
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub input: PriceArgs,
    /// Index column of the price file, or a separate index price file.
    #[arg(long)]
    pub index: String,
    #[arg(long)]
    pub outdir: PathBuf,
    /// Overrides the seed of the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub outdir: PathBuf,
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code: 0 on success, 1 on a domain error, 2 on a usage error.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    init_logging(cli.verbose);
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            log::debug!("thread pool already configured: {e}");
        }
    }
    let args: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match run(&cli, args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
}

fn manifest_path(cli: &Cli, default: &Path) -> PathBuf {
    cli.manifest.clone().unwrap_or_else(|| default.to_path_buf())
}

fn beside(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    path.with_file_name(name)
}

fn run(cli: &Cli, args: Vec<String>) -> Result<()> {
    match &cli.command {
        Command::Ingest(a) => ingest(cli, a, args),
        Command::Fit(a) => fit(cli, a, args),
        Command::Simulate(a) => simulate_cmd(cli, a, args),
        Command::Risk(a) => risk(cli, a, args),
        Command::Optimize(a) => optimize(cli, a, args),
        Command::Backtest(a) => backtest_cmd(cli, a, args),
        Command::Report(a) => report(cli, a, args),
    }
}

fn schema(p: &PriceArgs) -> PriceSchema {
    PriceSchema { date_column: p.date_column.clone(), columns: p.columns.clone() }
}

fn load_prices(p: &PriceArgs) -> Result<PricePanel> {
    data::load_prices(&p.prices, &schema(p)).with_context(|| format!("data-ingest: reading {}", p.prices.display()))
}

/// Returns and index returns. `index` names a column of the price file
/// unless it is the path of an existing file, whose first price column is
/// then joined on date with the panel.
fn panel_with_index(p: &PriceArgs, index: &str, m: &mut ManifestBuilder) -> Result<(ReturnPanel, Vec<f64>, String)> {
    m.input(&p.prices);
    let index_path = Path::new(index);
    if index_path.is_file() {
        m.input(index_path);
        let mut panel = load_prices(p)?;
        let idx = data::load_prices(index_path, &PriceSchema { date_column: p.date_column.clone(), columns: None })
            .with_context(|| format!("data-ingest: reading index file {index}"))?;
        let name = idx.assets.first().cloned().ok_or_else(|| anyhow!("data-ingest: index file {index} has no price column"))?;
        let lookup: std::collections::HashMap<_, _> = idx.dates.iter().zip(&idx.prices).map(|(d, r)| (*d, r[0])).collect();
        let mut dates = Vec::new();
        let mut prices = Vec::new();
        let mut index_prices = Vec::new();
        for (d, row) in panel.dates.iter().zip(&panel.prices) {
            if let Some(v) = lookup.get(d) {
                dates.push(*d);
                prices.push(row.clone());
                index_prices.push(*v);
            }
        }
        let dropped = panel.len() - dates.len();
        if dropped > 0 {
            log::warn!("{dropped} price dates have no index price and were dropped");
        }
        panel.dates = dates;
        panel.prices = prices;
        let returns = data::to_returns(&panel).context("data-ingest: price returns")?;
        let index_returns = data::series_returns(&index_prices).context("data-ingest: index returns")?;
        Ok((returns, index_returns, name))
    } else {
        let mut panel = load_prices(p)?;
        let col = panel
            .take_column(index)
            .ok_or_else(|| anyhow!("data-ingest: index {index:?} is neither a file nor a column of {}", p.prices.display()))?;
        let returns = data::to_returns(&panel).context("data-ingest: price returns")?;
        let index_returns = data::series_returns(&col).context("data-ingest: index returns")?;
        Ok((returns, index_returns, index.to_string()))
    }
}

fn ingest(cli: &Cli, a: &IngestArgs, args: Vec<String>) -> Result<()> {
    let mut m = ManifestBuilder::new("ingest", args, a)?;
    m.input(&a.input.prices);
    let panel = load_prices(&a.input)?;
    let returns = data::to_returns(&panel).context("data-ingest: returns")?;
    returns.write_csv(BufWriter::new(File::create(&a.out)?)).context("data-ingest: writing returns")?;
    m.output(&a.out);
    println!("{} dates, {} assets, {} rows dropped", panel.len(), panel.assets.len(), panel.dropped_rows);
    m.finish()?.write(&manifest_path(cli, &beside(&a.out)))
}

fn joint_config(a: &FitArgs, index_name: String) -> JointConfig {
    JointConfig {
        index_name,
        min_obs: a.min_obs,
        regimes: a.regimes,
        asset_regimes: match a.asset_regimes {
            AssetRegimeChoice::Same => AssetRegimes::SameAsIndex,
            AssetRegimeChoice::Own => AssetRegimes::Own,
        },
        innovation: match a.innovation {
            Innovation::T => InnovationFamily::StudentT,
            Innovation::Normal => InnovationFamily::Normal,
        },
        zero_means: a.zero_means,
        starts: a.starts,
        denoise: !a.no_denoise,
        seed: a.seed,
        ..JointConfig::default()
    }
}

fn write_reports(model: &JointModel, dir: &Path, m: &mut ManifestBuilder) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let ks = dir.join("ks.csv");
    joint::write_ks_csv(&ks, &model.ks_report().context("joint-estimator: KS report")?)?;
    let trans = dir.join("transition.csv");
    joint::write_transition_csv(&trans, model)?;
    let diag = dir.join("diagnostics.csv");
    joint::write_diagnostics_csv(&diag, model)?;
    let sel = dir.join("selection.csv");
    write_candidates_csv(&sel, &model.regime_selection, model.k())?;
    for p in [ks, trans, diag, sel] {
        m.output(&p);
    }
    Ok(())
}

fn fit(cli: &Cli, a: &FitArgs, args: Vec<String>) -> Result<()> {
    let mut m = ManifestBuilder::new("fit", args, a)?;
    m.seed(a.seed);
    let (returns, index, name) = panel_with_index(&a.input, &a.index, &mut m)?;
    let config = joint_config(a, name);
    let model = joint::estimate(&returns, &index, &config).context("joint-estimator")?;
    model.save(&a.out).context("joint-estimator: writing model")?;
    m.output(&a.out);
    if let Some(dir) = &a.reports {
        write_reports(&model, dir, &mut m)?;
    }
    println!("{} regimes, {} assets, {} observations", model.k(), model.assets.len(), model.n_obs);
    m.finish()?.write(&manifest_path(cli, &beside(&a.out)))
}

fn simulate_cmd(cli: &Cli, a: &SimulateArgs, args: Vec<String>) -> Result<()> {
    let mut m = ManifestBuilder::new("simulate", args, a)?;
    m.seed(a.seed);
    m.input(&a.model);
    let model = JointModel::load(&a.model).with_context(|| format!("scenario-engine: loading model {}", a.model.display()))?;
    let config = SimulationConfig {
        paths: a.paths,
        horizon: a.horizon,
        seed: a.seed,
        shocks: match a.shocks {
            Shocks::Coupled => ShockSource::Coupled,
            Shocks::Normal => ShockSource::Normal,
        },
    };
    let cube = simulate(&model, &config).context("scenario-engine: simulation")?;
    cube.save(&a.out).context("scenario-engine: writing cube")?;
    m.output(&a.out);
    if let Some(path) = &a.csv {
        cube.write_csv(BufWriter::new(File::create(path)?)).context("scenario-engine: writing cube CSV")?;
        m.output(path);
    }
    println!("{} paths x {} periods x {} assets", cube.s, cube.m, cube.n);
    m.finish()?.write(&manifest_path(cli, &beside(&a.out)))
}

fn load_cube(path: &Path) -> Result<ScenarioCube> {
    ScenarioCube::load(path).with_context(|| format!("loading cube {}", path.display()))
}

/// Reads `asset,weight` rows and orders them like `assets`.
fn read_weights(path: &Path, assets: &[String]) -> Result<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading weights {}", path.display()))?;
    let mut map = std::collections::HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() < 2 {
            bail!("weights file rows need `asset,weight`");
        }
        let w: f64 = rec[1].trim().parse().with_context(|| format!("bad weight for {}", &rec[0]))?;
        if map.insert(rec[0].trim().to_string(), w).is_some() {
            bail!("asset {} listed twice in the weights file", &rec[0]);
        }
    }
    if map.len() != assets.len() {
        bail!("weights file has {} assets, cube has {}", map.len(), assets.len());
    }
    assets.iter().map(|a| map.get(a).copied().ok_or_else(|| anyhow!("no weight for asset {a}"))).collect()
}

fn risk(cli: &Cli, a: &RiskArgs, args: Vec<String>) -> Result<()> {
    let mut m = ManifestBuilder::new("risk", args, a)?;
    m.input(&a.cube);
    m.input(&a.weights);
    let measure = a.measure.measure()?;
    let cube = load_cube(&a.cube)?;
    let w = read_weights(&a.weights, &cube.assets)?;
    let value = measure.evaluate(&cube, &w).context("risk-measures")?;
    println!("{}\t{value}", measure.name());
    if let Some(path) = &a.dd_out {
        let mut out = csv::Writer::from_path(path)?;
        out.write_record(["path", "period", "drawdown"])?;
        for (s, p) in cube.portfolio_paths(&w)?.iter().enumerate() {
            for (t, dd) in drawdowns(p).iter().enumerate() {
                out.write_record([(s + 1).to_string(), (t + 1).to_string(), dd.to_string()])?;
            }
        }
        out.flush()?;
        m.output(path);
    }
    let manifest = m.finish()?;
    match (&cli.manifest, &a.dd_out) {
        (Some(p), _) => manifest.write(p),
        (None, Some(dd)) => manifest.write(&beside(dd)),
        (None, None) => {
            eprintln!("{}", serde_json::to_string(&manifest)?);
            Ok(())
        }
    }
}

fn optimize(cli: &Cli, a: &OptimizeArgs, args: Vec<String>) -> Result<()> {
    let mut m = ManifestBuilder::new("optimize", args, a)?;
    m.input(&a.cube);
    let measure = a.measure.measure()?;
    let cube = load_cube(&a.cube)?;
    let set = ScenarioSet::from_cube(&cube);
    let bounds = WeightBounds::new(a.bounds.0, a.bounds.1);
    let front = frontier(&set, measure, &a.floors.0, bounds).context("optimizer: frontier")?;
    front.write_csv(BufWriter::new(File::create(&a.out)?), &cube.assets).context("optimizer: writing frontier")?;
    m.output(&a.out);
    let opt = front.optimal_point();
    println!("optimal floor {} risk {} expected return {} ratio {}", opt.d, opt.risk, opt.expected_return, opt.ratio);
    m.finish()?.write(&manifest_path(cli, &beside(&a.out)))
}

fn read_backtest_config(path: &Path) -> Result<BacktestConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).with_context(|| format!("backtester: invalid config {}", path.display()))
    } else {
        toml::from_str(&text).with_context(|| format!("backtester: invalid config {}", path.display()))
    }
}

fn backtest_cmd(cli: &Cli, a: &BacktestArgs, args: Vec<String>) -> Result<()> {
    let mut config = read_backtest_config(&a.config)?;
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    let mut m = ManifestBuilder::new("backtest", args, &config)?;
    m.seed(config.seed);
    m.input(&a.config);
    let (returns, index, name) = panel_with_index(&a.input, &a.index, &mut m)?;
    config.fit.index_name = name;
    let track = backtest::run(&config, &returns, &index).context("backtester")?;
    for path in backtest::export_reports(&track, &a.outdir, &TABLE_MEASURES).context("backtester: exporting reports")? {
        m.output(&path);
    }
    let fitted = track.rebalances.iter().filter(|r| r.fitted).count();
    println!("{} rebalances ({fitted} refitted), {} periods held", track.rebalances.len(), track.dates.len());
    m.finish()?.write(&manifest_path(cli, &a.outdir.join("manifest.json")))
}

fn report(cli: &Cli, a: &ReportArgs, args: Vec<String>) -> Result<()> {
    let mut m = ManifestBuilder::new("report", args, a)?;
    m.input(&a.model);
    let model = JointModel::load(&a.model).with_context(|| format!("loading model {}", a.model.display()))?;
    write_reports(&model, &a.outdir, &mut m)?;
    m.finish()?.write(&manifest_path(cli, &a.outdir.join("manifest.json")))
}
