//! Minimum-risk long-only allocation on scenario cubes.
//!
//! CVaR and CDaR are convex piecewise-linear in the weights. They are
//! minimized by Kelley's cutting-plane method: each iterate adds the exact
//! risk and a subgradient as a cut, and the small master LP over
//! `(x, t)` is re-solved until the cut model and the true risk agree. The
//! full Rockafellar-Uryasev LPs are available as reference solvers for
//! small instances. Variance is minimized by an active-set QP.

mod frontier;
pub mod lp;
mod qp;

pub use frontier::{frontier, label as frontier_label, Frontier, FrontierPoint, DEFAULT_FLOORS};
pub use qp::{solve_box_qp, QpSolution};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::risk::{tail_count, RiskMeasure};
use crate::scenario::ScenarioCube;
use lp::{LinearProgram, RowKind};

/// Per-asset weight bounds shared by every asset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightBounds {
    pub lo: f64,
    pub hi: f64,
}

impl Default for WeightBounds {
    fn default() -> Self {
        Self { lo: 0.01, hi: 0.15 }
    }
}

impl WeightBounds {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.lo >= 0.0 && self.lo <= self.hi && self.hi <= 1.0) {
            return Err(Error::InvalidParameter(format!("weight box [{}, {}] must satisfy 0 <= lo <= hi <= 1", self.lo, self.hi)));
        }
        let n = n as f64;
        if self.lo * n > 1.0 + 1e-12 || self.hi * n < 1.0 - 1e-12 {
            return Err(Error::Infeasible(format!("box [{}, {}] cannot hold a budget of 1 over {n} assets", self.lo, self.hi)));
        }
        Ok(())
    }
}

/// Scenario data in the form the solvers use.
#[derive(Debug, Clone)]
pub struct ScenarioSet {
    pub n: usize,
    pub s: usize,
    pub m: usize,
    /// Accumulated asset returns, `accum[(s * m + t) * n + a]`.
    pub accum: Vec<f64>,
    /// Mean horizon return per asset.
    pub mean: Vec<f64>,
}

impl ScenarioSet {
    pub fn from_cube(cube: &ScenarioCube) -> Self {
        let (n, s, m) = (cube.n, cube.s, cube.m);
        let mut accum = vec![0.0; s * m * n];
        for p in 0..s {
            for a in 0..n {
                let mut acc = 0.0;
                for t in 0..m {
                    acc += cube.get(p, t, a);
                    accum[(p * m + t) * n + a] = acc;
                }
            }
        }
        Self::from_accum(n, s, m, accum)
    }

    /// From per-period returns indexed `[s][t][a]`.
    pub fn from_returns(returns: &[Vec<Vec<f64>>]) -> Result<Self> {
        let s = returns.len();
        let m = returns.first().map_or(0, Vec::len);
        let n = returns.first().and_then(|p| p.first()).map_or(0, Vec::len);
        if s == 0 || m == 0 || n == 0 || returns.iter().any(|p| p.len() != m || p.iter().any(|r| r.len() != n)) {
            return Err(Error::Shape("scenario returns must be a non-empty S x M x N array".into()));
        }
        let mut accum = vec![0.0; s * m * n];
        for (p, path) in returns.iter().enumerate() {
            let mut acc = vec![0.0; n];
            for (t, r) in path.iter().enumerate() {
                for a in 0..n {
                    acc[a] += r[a];
                    accum[(p * m + t) * n + a] = acc[a];
                }
            }
        }
        Ok(Self::from_accum(n, s, m, accum))
    }

    fn from_accum(n: usize, s: usize, m: usize, accum: Vec<f64>) -> Self {
        let mut mean = vec![0.0; n];
        if m > 0 {
            for p in 0..s {
                for a in 0..n {
                    mean[a] += accum[(p * m + m - 1) * n + a] / s as f64;
                }
            }
        }
        Self { n, s, m, accum, mean }
    }

    pub fn at(&self, s: usize, t: usize) -> &[f64] {
        let i = (s * self.m + t) * self.n;
        &self.accum[i..i + self.n]
    }

    pub fn terminal(&self, s: usize) -> &[f64] {
        self.at(s, self.m - 1)
    }

    /// S x M accumulated portfolio paths.
    pub fn portfolio_paths(&self, x: &[f64]) -> Vec<Vec<f64>> {
        (0..self.s).map(|s| (0..self.m).map(|t| dot(self.at(s, t), x)).collect()).collect()
    }

    pub fn expected_return(&self, x: &[f64]) -> f64 {
        dot(&self.mean, x)
    }

    pub fn risk(&self, measure: &RiskMeasure, x: &[f64]) -> Result<f64> {
        measure.evaluate_paths(&self.portfolio_paths(x))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Largest attainable expected return over the box-simplex and a maximizer:
/// everything at `lo`, the remaining budget poured into the best assets.
pub fn max_expected_return(mean: &[f64], bounds: &WeightBounds) -> (f64, Vec<f64>) {
    let n = mean.len();
    let mut x = vec![bounds.lo; n];
    let mut left = 1.0 - bounds.lo * n as f64;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| mean[b].total_cmp(&mean[a]).then(a.cmp(&b)));
    for i in order {
        let add = (bounds.hi - bounds.lo).min(left.max(0.0));
        x[i] += add;
        left -= add;
    }
    (dot(mean, &x), x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocationProblem {
    pub measure: RiskMeasure,
    /// Lower bound on the expected horizon return.
    pub floor: f64,
    pub bounds: WeightBounds,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub weights: Vec<f64>,
    pub risk: f64,
    pub expected_return: f64,
    pub iterations: usize,
}

fn check_problem(set: &ScenarioSet, p: &AllocationProblem) -> Result<Vec<f64>> {
    p.measure.validate()?;
    p.bounds.validate(set.n)?;
    if !p.floor.is_finite() {
        return Err(Error::InvalidParameter("return floor must be finite".into()));
    }
    if set.s == 0 || set.m == 0 {
        return Err(Error::InsufficientData("empty scenario set".into()));
    }
    let (best, x) = max_expected_return(&set.mean, &p.bounds);
    if best < p.floor - 1e-12 * (1.0 + p.floor.abs()) {
        return Err(Error::Infeasible(format!("return floor {} exceeds the attainable maximum {best}", p.floor)));
    }
    Ok(x)
}

/// Minimizes the problem's risk measure.
pub fn min_risk(set: &ScenarioSet, p: &AllocationProblem) -> Result<Allocation> {
    let start = check_problem(set, p)?;
    let (weights, iterations) = match p.measure {
        RiskMeasure::Cvar { eta } => cutting_plane(set, p, start, |x| cvar_cut(set, eta, x))?,
        RiskMeasure::Cdar { eta } => cutting_plane(set, p, start, |x| cdar_cut(set, eta, x))?,
        RiskMeasure::Variance => {
            let q = terminal_covariance(set);
            let sol = solve_box_qp(&q, &set.mean, p.floor, &p.bounds, &start)?;
            (sol.x, sol.iterations)
        }
    };
    let risk = set.risk(&p.measure, &weights)?;
    Ok(Allocation { expected_return: set.expected_return(&weights), weights, risk, iterations })
}

pub fn min_cvar_allocation(set: &ScenarioSet, eta: f64, floor: f64, bounds: WeightBounds) -> Result<Allocation> {
    min_risk(set, &AllocationProblem { measure: RiskMeasure::Cvar { eta }, floor, bounds })
}

pub fn min_cdar_allocation(set: &ScenarioSet, eta: f64, floor: f64, bounds: WeightBounds) -> Result<Allocation> {
    min_risk(set, &AllocationProblem { measure: RiskMeasure::Cdar { eta }, floor, bounds })
}

pub fn min_variance_allocation(set: &ScenarioSet, floor: f64, bounds: WeightBounds) -> Result<Allocation> {
    min_risk(set, &AllocationProblem { measure: RiskMeasure::Variance, floor, bounds })
}

/// Population covariance of horizon returns, N x N row-major.
pub fn terminal_covariance(set: &ScenarioSet) -> Vec<Vec<f64>> {
    let n = set.n;
    let mut q = vec![vec![0.0; n]; n];
    for s in 0..set.s {
        let r = set.terminal(s);
        for i in 0..n {
            let di = r[i] - set.mean[i];
            for j in 0..=i {
                q[i][j] += di * (r[j] - set.mean[j]);
            }
        }
    }
    for i in 0..n {
        for j in 0..=i {
            q[i][j] /= set.s as f64;
            q[j][i] = q[i][j];
        }
    }
    q
}

/// Tail weights of a pooled sample: the worst `K - 1` items get `1 / len`,
/// the `K`-th gets the remainder of `1 - eta`; all divided by `1 - eta`.
fn tail_weights(len: usize, eta: f64) -> Vec<f64> {
    if eta >= 1.0 {
        return vec![1.0];
    }
    let k = tail_count(len, eta);
    let tail = 1.0 - eta;
    let mut w = vec![1.0 / (len as f64 * tail); k];
    w[k - 1] = (tail - (k - 1) as f64 / len as f64).max(0.0) / tail;
    w
}

/// CVaR of horizon returns and a subgradient.
pub fn cvar_cut(set: &ScenarioSet, eta: f64, x: &[f64]) -> (f64, Vec<f64>) {
    let mut r: Vec<(f64, usize)> = (0..set.s).map(|s| (dot(set.terminal(s), x), s)).collect();
    r.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut value = 0.0;
    let mut g = vec![0.0; set.n];
    for (w, (v, s)) in tail_weights(set.s, eta).into_iter().zip(r) {
        value -= w * v;
        for (gi, ti) in g.iter_mut().zip(set.terminal(s)) {
            *gi -= w * ti;
        }
    }
    (value, g)
}

/// Pooled CDaR of accumulated paths and a subgradient.
pub fn cdar_cut(set: &ScenarioSet, eta: f64, x: &[f64]) -> (f64, Vec<f64>) {
    let (n, m) = (set.n, set.m);
    // (drawdown, s, t, peak index or None for the initial zero level)
    let mut dd: Vec<(f64, usize, usize, Option<usize>)> = Vec::with_capacity(set.s * m);
    for s in 0..set.s {
        let mut peak = 0.0;
        let mut arg = None;
        for t in 0..m {
            let u = dot(set.at(s, t), x);
            if u > peak {
                peak = u;
                arg = Some(t);
            }
            dd.push((peak - u, s, t, arg));
        }
    }
    let weights = tail_weights(dd.len(), eta);
    dd.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut value = 0.0;
    let mut g = vec![0.0; n];
    for (w, (v, s, t, arg)) in weights.into_iter().zip(dd) {
        value += w * v;
        let cur = set.at(s, t);
        match arg {
            Some(j) => {
                let top = set.at(s, j);
                for a in 0..n {
                    g[a] += w * (top[a] - cur[a]);
                }
            }
            None => {
                for a in 0..n {
                    g[a] -= w * cur[a];
                }
            }
        }
    }
    (value, g)
}

const CUT_GAP: f64 = 1e-10;
const MAX_CUTS: usize = 5000;

/// Kelley's method on the box-simplex with a return floor.
fn cutting_plane(
    set: &ScenarioSet,
    p: &AllocationProblem,
    start: Vec<f64>,
    eval: impl Fn(&[f64]) -> (f64, Vec<f64>),
) -> Result<(Vec<f64>, usize)> {
    let n = set.n;
    let mut master = LinearProgram::new(n + 1);
    master.c[n] = 1.0;
    master.lower = vec![p.bounds.lo; n];
    master.upper = vec![p.bounds.hi; n];
    master.lower.push(f64::NEG_INFINITY);
    master.upper.push(f64::INFINITY);
    let mut budget = vec![1.0; n];
    budget.push(0.0);
    master.add_row(budget, RowKind::Eq, 1.0);
    let mut floor = set.mean.clone();
    floor.push(0.0);
    master.add_row(floor, RowKind::Ge, p.floor);

    let mut x = start;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for iter in 1..=MAX_CUTS {
        let (f, g) = eval(&x);
        if best.as_ref().is_none_or(|b| f < b.0) {
            best = Some((f, x.clone()));
        }
        // t - g.x >= f - g.x_k
        let mut row: Vec<f64> = g.iter().map(|v| -v).collect();
        row.push(1.0);
        master.add_row(row, RowKind::Ge, f - dot(&g, &x));
        let sol = master.solve()?;
        let lower = sol.objective;
        let upper = best.as_ref().map_or(f64::INFINITY, |b| b.0);
        if upper - lower <= CUT_GAP * (1.0 + upper.abs()) {
            let (_, w) = best.expect("at least one iterate");
            return Ok((w, iter));
        }
        x = sol.x[..n].to_vec();
        for v in x.iter_mut() {
            *v = v.clamp(p.bounds.lo, p.bounds.hi);
        }
    }
    Err(Error::NoConvergence(format!("cutting planes did not close the gap in {MAX_CUTS} cuts")))
}

/// Reference CVaR solver: the full LP over `(x, zeta, z_1..z_S)`.
pub fn cvar_full_lp(set: &ScenarioSet, eta: f64, floor: f64, bounds: WeightBounds) -> Result<(Vec<f64>, f64)> {
    let (n, s) = (set.n, set.s);
    let nv = n + 1 + s;
    let mut lp = LinearProgram::new(nv);
    lp.c[n] = 1.0;
    for k in 0..s {
        lp.c[n + 1 + k] = 1.0 / ((1.0 - eta) * s as f64);
    }
    for a in 0..n {
        lp.lower[a] = bounds.lo;
        lp.upper[a] = bounds.hi;
    }
    lp.lower[n] = f64::NEG_INFINITY;
    let mut budget = vec![0.0; nv];
    budget[..n].iter_mut().for_each(|v| *v = 1.0);
    lp.add_row(budget, RowKind::Eq, 1.0);
    let mut fl = vec![0.0; nv];
    fl[..n].copy_from_slice(&set.mean);
    lp.add_row(fl, RowKind::Ge, floor);
    for k in 0..s {
        // z_k + zeta + R_k(x) >= 0
        let mut row = vec![0.0; nv];
        row[..n].copy_from_slice(set.terminal(k));
        row[n] = 1.0;
        row[n + 1 + k] = 1.0;
        lp.add_row(row, RowKind::Ge, 0.0);
    }
    let sol = lp.solve()?;
    Ok((sol.x[..n].to_vec(), sol.objective))
}

/// Reference CDaR solver: the full LP with running peaks `p_{s,t}` and
/// excesses `z_{s,t}`.
pub fn cdar_full_lp(set: &ScenarioSet, eta: f64, floor: f64, bounds: WeightBounds) -> Result<(Vec<f64>, f64)> {
    let (n, s, m) = (set.n, set.s, set.m);
    let cells = s * m;
    let peak = |k: usize, t: usize| n + 1 + k * m + t;
    let excess = |k: usize, t: usize| n + 1 + cells + k * m + t;
    let max_only = eta >= 1.0;
    let nv = if max_only { n + 1 + cells } else { n + 1 + 2 * cells };
    let mut lp = LinearProgram::new(nv);
    lp.c[n] = 1.0;
    for a in 0..n {
        lp.lower[a] = bounds.lo;
        lp.upper[a] = bounds.hi;
    }
    // With eta = 0 every zeta <= 0 is optimal; pin it to keep the LP
    // free of a flat unbounded ray.
    lp.lower[n] = if eta <= 0.0 { 0.0 } else { f64::NEG_INFINITY };
    lp.upper[n] = if eta <= 0.0 { 0.0 } else { f64::INFINITY };
    if !max_only {
        for k in 0..s {
            for t in 0..m {
                lp.c[excess(k, t)] = 1.0 / ((1.0 - eta) * cells as f64);
            }
        }
    }
    let mut budget = vec![0.0; nv];
    budget[..n].iter_mut().for_each(|v| *v = 1.0);
    lp.add_row(budget, RowKind::Eq, 1.0);
    let mut fl = vec![0.0; nv];
    fl[..n].copy_from_slice(&set.mean);
    lp.add_row(fl, RowKind::Ge, floor);
    for k in 0..s {
        for t in 0..m {
            if t > 0 {
                let mut row = vec![0.0; nv];
                row[peak(k, t)] = 1.0;
                row[peak(k, t - 1)] = -1.0;
                lp.add_row(row, RowKind::Ge, 0.0);
            }
            let u = set.at(k, t);
            let mut row = vec![0.0; nv];
            row[peak(k, t)] = 1.0;
            row[..n].iter_mut().zip(u).for_each(|(r, v)| *r = -v);
            lp.add_row(row, RowKind::Ge, 0.0);
            // excess (or zeta alone for the maximum) >= p - U - zeta
            let mut row = vec![0.0; nv];
            if !max_only {
                row[excess(k, t)] = 1.0;
            }
            row[n] = 1.0;
            row[peak(k, t)] = -1.0;
            row[..n].iter_mut().zip(u).for_each(|(r, v)| *r = *v);
            lp.add_row(row, RowKind::Ge, 0.0);
        }
    }
    let sol = lp.solve()?;
    Ok((sol.x[..n].to_vec(), sol.objective))
}
