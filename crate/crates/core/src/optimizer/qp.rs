//! Primal active-set method for `min 1/2 x'Qx` over the box-simplex with a
//! return floor. Steps are computed in the null space of the working
//! constraints; directions of zero curvature are followed as rays until a
//! constraint blocks.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::WeightBounds;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

const ACTIVE_TOL: f64 = 1e-12;
const MULT_TOL: f64 = 1e-10;

struct Constraints<'a> {
    n: usize,
    mean: &'a [f64],
    floor: f64,
    bounds: WeightBounds,
}

impl Constraints<'_> {
    fn count(&self) -> usize {
        2 * self.n + 1
    }

    /// Constraint `c` as `a.x >= b`.
    fn normal(&self, c: usize) -> DVector<f64> {
        let n = self.n;
        if c < n {
            DVector::from_fn(n, |i, _| if i == c { 1.0 } else { 0.0 })
        } else if c < 2 * n {
            DVector::from_fn(n, |i, _| if i == c - n { -1.0 } else { 0.0 })
        } else {
            DVector::from_column_slice(self.mean)
        }
    }

    fn rhs(&self, c: usize) -> f64 {
        if c < self.n {
            self.bounds.lo
        } else if c < 2 * self.n {
            -self.bounds.hi
        } else {
            self.floor
        }
    }

    fn working_matrix(&self, working: &[usize]) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(working.len() + 1, self.n);
        a.row_mut(0).fill(1.0);
        for (r, &c) in working.iter().enumerate() {
            a.row_mut(r + 1).copy_from(&self.normal(c).transpose());
        }
        a
    }
}

/// Orthonormal basis of the null space of `a` (columns).
fn null_space(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.ncols();
    let gram = a.transpose() * a;
    let eig = SymmetricEigen::new(gram);
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max).max(1.0);
    let cols: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] <= 1e-10 * top).collect();
    DMatrix::from_fn(n, cols.len(), |r, c| eig.eigenvectors[(r, cols[c])])
}

fn rank(a: &DMatrix<f64>) -> usize {
    let sv = a.clone().svd(false, false).singular_values;
    let top = sv.iter().cloned().fold(0.0, f64::max);
    sv.iter().filter(|s| **s > 1e-10 * top.max(1e-300)).count()
}

/// Minimizes `1/2 x'Qx` subject to `sum x = 1`, `mean.x >= floor` and the
/// box, starting from the feasible point `start`.
pub fn solve_box_qp(q: &[Vec<f64>], mean: &[f64], floor: f64, bounds: &WeightBounds, start: &[f64]) -> Result<QpSolution> {
    let n = mean.len();
    if q.len() != n || q.iter().any(|r| r.len() != n) || start.len() != n {
        return Err(Error::Shape(format!("QP of dimension {n} with mismatched inputs")));
    }
    let qm = DMatrix::from_fn(n, n, |i, j| q[i][j]);
    let scale = (0..n).map(|i| qm[(i, i)]).fold(0.0, f64::max);
    let qs = if scale > 0.0 { &qm / scale } else { qm.clone() };
    let cons = Constraints { n, mean, floor, bounds: *bounds };
    let mut x = DVector::from_column_slice(start);
    let mut working: Vec<usize> = Vec::new();
    for c in 0..cons.count() {
        if (cons.normal(c).dot(&x) - cons.rhs(c)).abs() <= ACTIVE_TOL * (1.0 + cons.rhs(c).abs()) {
            let mut trial = working.clone();
            trial.push(c);
            if rank(&cons.working_matrix(&trial)) == trial.len() + 1 {
                working = trial;
            }
        }
    }
    let limit = 50 * (n + 3) * (n + 3);
    for iter in 1..=limit {
        let g = &qs * &x;
        let a = cons.working_matrix(&working);
        let z = null_space(&a);
        let mut step = DVector::zeros(n);
        let mut ray = false;
        if z.ncols() > 0 {
            let h = z.transpose() * &qs * &z;
            let gz = z.transpose() * &g;
            let eig = SymmetricEigen::new(h);
            let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max).max(1e-300);
            let mut newton = DVector::zeros(z.ncols());
            let mut flat = DVector::zeros(z.ncols());
            for i in 0..z.ncols() {
                let v = eig.eigenvectors.column(i);
                let c = v.dot(&gz);
                if eig.eigenvalues[i] > 1e-12 * top {
                    newton -= v * (c / eig.eigenvalues[i]);
                } else {
                    flat -= v * c;
                }
            }
            if flat.norm() > 1e-12 * (1.0 + gz.norm()) {
                step = &z * flat;
                ray = true;
            } else {
                step = &z * newton;
            }
        }
        if step.norm() <= 1e-13 {
            // Multipliers from A' lambda = g (least squares).
            let at = a.transpose();
            let lambda = at.clone().svd(true, true).solve(&g, 1e-14).map_err(|e| Error::NoConvergence(e.to_string()))?;
            let worst = (1..lambda.len()).min_by(|&i, &j| lambda[i].total_cmp(&lambda[j]));
            match worst {
                Some(i) if lambda[i] < -MULT_TOL => {
                    working.remove(i - 1);
                    continue;
                }
                _ => {
                    let xs: Vec<f64> = x.iter().map(|v| v.clamp(bounds.lo, bounds.hi)).collect();
                    let xv = DVector::from_column_slice(&xs);
                    let objective = 0.5 * xv.dot(&(&qm * &xv));
                    return Ok(QpSolution { x: xs, objective, iterations: iter });
                }
            }
        }
        let mut alpha = if ray { f64::INFINITY } else { 1.0 };
        let mut blocking = None;
        for c in 0..cons.count() {
            if working.contains(&c) {
                continue;
            }
            let ad = cons.normal(c).dot(&step);
            if ad < -1e-14 {
                let slack = (cons.normal(c).dot(&x) - cons.rhs(c)).max(0.0);
                let t = slack / -ad;
                if t < alpha {
                    alpha = t;
                    blocking = Some(c);
                }
            }
        }
        if !alpha.is_finite() {
            return Err(Error::Unbounded("quadratic objective unbounded on the feasible set".into()));
        }
        x += step * alpha;
        if let Some(c) = blocking {
            let mut trial = working.clone();
            trial.push(c);
            if rank(&cons.working_matrix(&trial)) == trial.len() + 1 {
                working = trial;
            }
        }
    }
    Err(Error::NoConvergence("active-set QP iteration limit".into()))
}
