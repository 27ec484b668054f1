//! Monte Carlo scenario generation from a fitted joint model.
//!
//! Every scenario path `s` owns its random streams: the market chain, the
//! asset chains, the per-regime innovation pools and the optional normal
//! variance shocks are all derived from `split(seed, domain, s)`. Paths are
//! therefore independent of each other and of the thread schedule, and a
//! shorter horizon reproduces a prefix of a longer one.

mod cube;

pub use cube::{ScenarioCube, CUBE_MAGIC};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::garch::{draw_categorical, MrsGarchParams};
use crate::joint::JointModel;
use crate::rng::{self, domain};
use crate::tempered_stable::{MntsSampler, StdMntsParams};

/// Source of the standardized shock that drives the variance recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShockSource {
    /// The same stdMNTS innovation that enters the return.
    #[default]
    Coupled,
    /// An independent standard normal draw.
    Normal,
}

/// Initial regime of a chain.
#[derive(Debug, Clone, PartialEq)]
pub enum ChainStart {
    State(usize),
    /// Distribution of the regime one period before the first simulated
    /// period. The first state is drawn from `start * P`.
    Distribution(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChainPath {
    pub states: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ChainSample {
    pub paths: Vec<MarkovChainPath>,
    /// Visits to each regime over all paths and periods.
    pub tallies: Vec<usize>,
}

impl ChainSample {
    /// Visits to each regime on path `s`.
    pub fn path_tallies(&self, s: usize, k: usize) -> Vec<usize> {
        let mut t = vec![0; k];
        for &j in &self.paths[s].states {
            t[j] += 1;
        }
        t
    }
}

fn check_stochastic(trans: &[Vec<f64>]) -> Result<()> {
    let k = trans.len();
    if k == 0 {
        return Err(Error::Shape("empty transition matrix".into()));
    }
    for row in trans {
        if row.len() != k {
            return Err(Error::Shape("transition matrix is not square".into()));
        }
        if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidParameter(format!("transition row {row:?} is not a probability vector")));
        }
    }
    Ok(())
}

fn first_state<R: Rng>(trans: &[Vec<f64>], start: &ChainStart, g: &mut R) -> Result<usize> {
    let k = trans.len();
    match start {
        ChainStart::State(j) if *j < k => Ok(*j),
        ChainStart::State(j) => Err(Error::Shape(format!("start regime {j} but only {k} regimes"))),
        ChainStart::Distribution(p) => {
            if p.len() != k {
                return Err(Error::Shape(format!("start distribution has {} entries, expected {k}", p.len())));
            }
            let total: f64 = p.iter().sum();
            if !(total > 0.0) || p.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::InvalidParameter("start distribution must be non-negative and non-zero".into()));
            }
            let next: Vec<f64> = (0..k).map(|j| (0..k).map(|i| p[i] / total * trans[i][j]).sum()).collect();
            Ok(draw_categorical(&next, g.random::<f64>()))
        }
    }
}

fn chain_path<R: Rng>(trans: &[Vec<f64>], start: &ChainStart, m: usize, g: &mut R) -> Result<Vec<usize>> {
    let mut states = Vec::with_capacity(m);
    if m == 0 {
        return Ok(states);
    }
    let mut state = first_state(trans, start, g)?;
    states.push(state);
    for _ in 1..m {
        state = draw_categorical(&trans[state], g.random::<f64>());
        states.push(state);
    }
    Ok(states)
}

/// Simulates `count` independent chains of length `m`. A `State` start is
/// the regime of the first period.
pub fn simulate_regime_chain(trans: &[Vec<f64>], start: &ChainStart, m: usize, count: usize, seed: u64) -> Result<ChainSample> {
    check_stochastic(trans)?;
    let paths: Vec<MarkovChainPath> = (0..count)
        .into_par_iter()
        .map(|s| {
            let mut g = rng::stream(seed, domain::MARKET_CHAIN, s as u64);
            chain_path(trans, start, m, &mut g).map(|states| MarkovChainPath { states })
        })
        .collect::<Result<_>>()?;
    let mut tallies = vec![0; trans.len()];
    for p in &paths {
        for &j in &p.states {
            tallies[j] += 1;
        }
    }
    Ok(ChainSample { paths, tallies })
}

/// Per-regime stdMNTS draws for every path, `pools[s][j]` holding
/// `tally[s][j]` draws of dimension `n` back to back.
#[derive(Debug, Clone)]
pub struct InnovationPools {
    pub n: usize,
    pub pools: Vec<Vec<Vec<f64>>>,
}

impl InnovationPools {
    pub fn pool_size(&self, s: usize, regime: usize) -> usize {
        self.pools[s][regime].len() / self.n.max(1)
    }

    /// All draws of one regime over all paths, one row per draw.
    pub fn regime_draws(&self, regime: usize) -> Vec<Vec<f64>> {
        self.pools.iter().flat_map(|p| p[regime].chunks(self.n).map(<[f64]>::to_vec)).collect()
    }
}

fn regime_stream(seed: u64, s: usize, regime: usize) -> rng::StreamRng {
    rng::stream(rng::split(seed, domain::INNOVATION_POOL, s as u64), domain::INNOVATION_POOL, regime as u64)
}

/// Draws `tallies[s][j]` stdMNTS vectors of regime `j` for every path `s`.
pub fn draw_regime_tagged_innovations(nts: &[StdMntsParams], tallies: &[Vec<usize>], seed: u64) -> Result<InnovationPools> {
    let n = nts.first().map_or(0, StdMntsParams::dim);
    if nts.iter().any(|p| p.dim() != n) {
        return Err(Error::Shape("regime innovation laws differ in dimension".into()));
    }
    let samplers: Vec<MntsSampler> = nts.iter().map(|p| MntsSampler::new(p.to_mnts())).collect::<Result<_>>()?;
    if let Some(t) = tallies.iter().find(|t| t.len() != nts.len()) {
        return Err(Error::Shape(format!("tally has {} regimes, model has {}", t.len(), nts.len())));
    }
    let pools = tallies
        .par_iter()
        .enumerate()
        .map(|(s, tally)| {
            samplers
                .iter()
                .zip(tally)
                .enumerate()
                .map(|(j, (sampler, &count))| {
                    let mut g = regime_stream(seed, s, j);
                    let mut pool = vec![0.0; count * n];
                    for draw in pool.chunks_mut(n.max(1)).take(count) {
                        sampler.sample_into(&mut g, draw);
                    }
                    pool
                })
                .collect()
        })
        .collect();
    Ok(InnovationPools { n, pools })
}

/// Hands out pool draws in the order the market chain visits each regime.
pub fn tag_innovations(chains: &ChainSample, pools: &InnovationPools) -> Result<Vec<Vec<Vec<f64>>>> {
    let n = pools.n;
    if pools.pools.len() != chains.paths.len() {
        return Err(Error::Shape("pools and chains disagree on path count".into()));
    }
    chains
        .paths
        .iter()
        .zip(&pools.pools)
        .map(|(path, pool)| {
            let mut next = vec![0usize; pool.len()];
            path.states
                .iter()
                .map(|&j| {
                    let i = next[j];
                    assert!((i + 1) * n <= pool[j].len(), "innovation pool of regime {j} exhausted");
                    next[j] += 1;
                    Ok(pool[j][i * n..(i + 1) * n].to_vec())
                })
                .collect()
        })
        .collect()
}

/// Simulated standard deviations of one asset.
#[derive(Debug, Clone)]
pub struct VariancePaths {
    /// S x M realized standard deviations.
    pub sigma: Vec<Vec<f64>>,
    /// S x M regime of the asset's own chain.
    pub regimes: Vec<Vec<usize>>,
}

/// Starting state of a variance simulation.
#[derive(Debug, Clone)]
pub struct VarianceStart {
    /// Parallel variances in force in the first simulated period.
    pub sigma2: Vec<f64>,
    pub chain: ChainStart,
}

impl VarianceStart {
    pub fn stationary(params: &MrsGarchParams) -> Self {
        Self { sigma2: params.initial_variance(1.0), chain: ChainStart::Distribution(params.stationary_distribution()) }
    }
}

/// Simulates `count` paths of the asset's standard deviation. With
/// `shocks = Some(z)` the recursion is driven by `u = sigma * z[s][m]`,
/// otherwise by independent standard normal shocks. `index` separates the
/// streams of different assets.
pub fn simulate_variance_paths(
    params: &MrsGarchParams,
    start: &VarianceStart,
    m: usize,
    count: usize,
    seed: u64,
    index: usize,
    shocks: Option<&[Vec<f64>]>,
) -> Result<VariancePaths> {
    params.validate()?;
    let k = params.k();
    if start.sigma2.len() != k || start.sigma2.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidParameter("initial variances must be k non-negative values".into()));
    }
    if let Some(z) = shocks {
        if z.len() != count || z.iter().any(|row| row.len() != m) {
            return Err(Error::Shape(format!("shocks must be {count} x {m}")));
        }
    }
    let rows: Vec<(Vec<f64>, Vec<usize>)> = (0..count)
        .into_par_iter()
        .map(|s| {
            let path_seed = rng::split(seed, domain::ASSET_CHAIN, s as u64);
            let mut chain_rng = rng::stream(path_seed, domain::ASSET_CHAIN, index as u64);
            let mut shock_rng = rng::stream(path_seed, domain::VARIANCE_SHOCK, index as u64);
            let states = chain_path(&params.trans, &start.chain, m, &mut chain_rng)?;
            let mut sigma2 = start.sigma2.clone();
            let mut sig = Vec::with_capacity(m);
            for (t, &j) in states.iter().enumerate() {
                let sd = sigma2[j].sqrt();
                sig.push(sd);
                let z = match shocks {
                    Some(z) => z[s][t],
                    None => shock_rng.sample(rand_distr::StandardNormal),
                };
                let u = sd * z;
                for (i, v) in sigma2.iter_mut().enumerate() {
                    *v = params.omega[i] + params.alpha[i] * u * u + params.beta[i] * *v;
                }
            }
            Ok((sig, states))
        })
        .collect::<Result<_>>()?;
    let (sigma, regimes) = rows.into_iter().unzip();
    Ok(VariancePaths { sigma, regimes })
}

/// `returns[s][m][a] = eta[a][r] + sigma[a][s][m] * eps[s][m][a]` with `r`
/// the asset's own regime at `(s, m)`.
pub fn assemble_returns(
    variances: &[VariancePaths],
    innovations: &[Vec<Vec<f64>>],
    chains: &ChainSample,
    eta: &[Vec<f64>],
    assets: Vec<String>,
    seed: u64,
) -> Result<ScenarioCube> {
    let n = variances.len();
    let s_len = chains.paths.len();
    let m = chains.paths.first().map_or(0, |p| p.states.len());
    if eta.len() != n || assets.len() != n {
        return Err(Error::Shape(format!("{n} variance sets, {} mean vectors, {} asset names", eta.len(), assets.len())));
    }
    let shape_ok = |rows: &[Vec<f64>]| rows.len() == s_len && rows.iter().all(|r| r.len() == m);
    if chains.paths.iter().any(|p| p.states.len() != m) || variances.iter().any(|v| !shape_ok(&v.sigma)) {
        return Err(Error::Shape(format!("variance paths and chains must all be {s_len} x {m}")));
    }
    if innovations.len() != s_len || innovations.iter().any(|p| p.len() != m || p.iter().any(|e| e.len() != n)) {
        return Err(Error::Shape(format!("innovations must be {s_len} x {m} x {n}")));
    }
    let mut returns = Vec::with_capacity(s_len * m * n);
    for s in 0..s_len {
        for t in 0..m {
            for a in 0..n {
                let r = variances[a].regimes[s][t];
                let mean = *eta[a].get(r).ok_or_else(|| Error::Shape(format!("asset {a} has no mean for regime {r}")))?;
                returns.push(mean + variances[a].sigma[s][t] * innovations[s][t][a]);
            }
        }
    }
    let regimes = chains.paths.iter().flat_map(|p| p.states.iter().map(|&j| j as u32)).collect();
    ScenarioCube::new(s_len, m, assets, returns, regimes, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub paths: usize,
    pub horizon: usize,
    pub seed: u64,
    pub shocks: ShockSource,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self { paths: 1000, horizon: 10, seed: 0, shocks: ShockSource::Coupled }
    }
}

/// Runs the four simulation steps from the end of the estimation sample.
pub fn simulate(model: &JointModel, config: &SimulationConfig) -> Result<ScenarioCube> {
    let (s_len, m, seed) = (config.paths, config.horizon, config.seed);
    let nts: Vec<StdMntsParams> = model.regimes.iter().map(|r| r.std_mnts()).collect::<Result<_>>()?;
    let market_start = ChainStart::Distribution(model.index.last_probs.clone());
    let chains = simulate_regime_chain(model.trans(), &market_start, m, s_len, seed)?;
    let k = nts.len();
    let tallies: Vec<Vec<usize>> = (0..s_len).map(|s| chains.path_tallies(s, k)).collect();
    let pools = draw_regime_tagged_innovations(&nts, &tallies, seed)?;
    let eps = tag_innovations(&chains, &pools)?;
    let variances = model
        .asset_models
        .iter()
        .enumerate()
        .map(|(a, am)| {
            let start = VarianceStart { sigma2: am.next_sigma2.clone(), chain: ChainStart::Distribution(am.last_probs.clone()) };
            let shocks: Option<Vec<Vec<f64>>> = match config.shocks {
                ShockSource::Coupled => Some(eps.iter().map(|p| p.iter().map(|e| e[a]).collect()).collect()),
                ShockSource::Normal => None,
            };
            simulate_variance_paths(&am.params, &start, m, s_len, seed, a, shocks.as_deref())
        })
        .collect::<Result<Vec<_>>>()?;
    let eta: Vec<Vec<f64>> = model.asset_models.iter().map(|am| am.params.eta.clone()).collect();
    assemble_returns(&variances, &eps, &chains, &eta, model.assets.clone(), seed)
}
