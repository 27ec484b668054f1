#![allow(dead_code)]

use chrono::NaiveDate;
use mrsmnts::data::ReturnPanel;
use mrsmnts::garch::draw_categorical;
use mrsmnts::rng;
use mrsmnts::tempered_stable::{MntsSampler, StdMntsParams};
use rand::Rng;

pub struct Market {
    pub panel: ReturnPanel,
    pub index: Vec<f64>,
    pub regimes: Vec<usize>,
    pub nts: Vec<StdMntsParams>,
}

pub fn equicorrelation(n: usize, rho: f64) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { rho }).collect()).collect()
}

pub fn dates(len: usize) -> Vec<NaiveDate> {
    let start = NaiveDate::from_ymd_opt(2000, 1, 3).unwrap();
    (0..len).map(|i| start + chrono::Days::new(i as u64)).collect()
}

/// Two-regime market: a persistent calm/turbulent chain drives the index
/// variance, every asset's variance and the regime of the joint stdMNTS
/// innovations. Index innovations share each regime's tail parameters.
/// Regime 0 is calm.
pub fn synthetic_market(n: usize, t_len: usize, seed: u64, nts: Vec<StdMntsParams>) -> Market {
    let trans = [[0.99, 0.01], [0.02, 0.98]];
    let index_omega = [1e-6, 6e-5];
    let samplers: Vec<MntsSampler> = nts.iter().map(|p| MntsSampler::new(p.to_mnts()).unwrap()).collect();
    let index_samplers: Vec<MntsSampler> = nts
        .iter()
        .map(|p| MntsSampler::new(StdMntsParams::new(p.lambda, p.theta, vec![0.0], vec![vec![1.0]]).unwrap().to_mnts()).unwrap())
        .collect();
    let mut z = [0.0];
    let mut g = rng::from_seed(seed);
    let mut state = 0usize;
    let mut index_s2: [f64; 2] = [1e-6 / 0.06, 6e-5 / 0.12];
    let mut asset_s2: Vec<[f64; 2]> = (0..n).map(|a| [1e-6 * (1.0 + a as f64 * 0.2) / 0.06, 1e-5 * (1.0 + a as f64 * 0.2) / 0.12]).collect();
    let mut rows = Vec::with_capacity(t_len);
    let mut index = Vec::with_capacity(t_len);
    let mut regimes = Vec::with_capacity(t_len);
    let mut eps = vec![0.0; n];
    for t in 0..t_len {
        if t > 0 {
            state = draw_categorical(&trans[state], g.random::<f64>());
        }
        regimes.push(state);
        index_samplers[state].sample_into(&mut g, &mut z);
        let u = index_s2[state].sqrt() * z[0];
        index.push(u);
        for j in 0..2 {
            index_s2[j] = index_omega[j] + [0.04, 0.08][j] * u * u + [0.9, 0.8][j] * index_s2[j];
        }
        samplers[state].sample_into(&mut g, &mut eps);
        let mut row = Vec::with_capacity(n);
        for a in 0..n {
            let s = asset_s2[a];
            let u = s[state].sqrt() * eps[a];
            row.push(u);
            let w = [1e-6 * (1.0 + a as f64 * 0.2), 1e-5 * (1.0 + a as f64 * 0.2)];
            asset_s2[a] = [w[0] + 0.04 * u * u + 0.9 * s[0], w[1] + 0.08 * u * u + 0.8 * s[1]];
        }
        rows.push(row);
    }
    let panel = ReturnPanel { dates: dates(t_len), assets: (0..n).map(|a| format!("A{a}")).collect(), returns: rows };
    Market { panel, index, regimes, nts }
}

pub fn frobenius(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().zip(b).flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q) * (p - q))).sum::<f64>().sqrt()
}
