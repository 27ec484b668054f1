//! Linear programs in row form, solved with `microlp`. Every solution is
//! checked against the rows and bounds before it is returned.

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub kind: RowKind,
    pub rhs: f64,
}

/// `min c.x` subject to the rows and `lower <= x <= upper` (bounds may be
/// infinite).
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub c: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

impl LinearProgram {
    pub fn new(n: usize) -> Self {
        Self { c: vec![0.0; n], lower: vec![0.0; n], upper: vec![f64::INFINITY; n], rows: Vec::new() }
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, kind: RowKind, rhs: f64) {
        self.rows.push(Row { coeffs, kind, rhs });
    }

    /// Largest violation of a row or a bound by `x`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let rows = self.rows.iter().map(|r| {
            let lhs: f64 = r.coeffs.iter().zip(x).map(|(a, b)| a * b).sum();
            match r.kind {
                RowKind::Le => (lhs - r.rhs).max(0.0),
                RowKind::Ge => (r.rhs - lhs).max(0.0),
                RowKind::Eq => (lhs - r.rhs).abs(),
            }
        });
        let bounds = x.iter().zip(self.lower.iter().zip(&self.upper)).map(|(v, (lo, hi))| (lo - v).max(v - hi).max(0.0));
        rows.chain(bounds).fold(0.0, f64::max)
    }

    pub fn solve(&self) -> Result<LpSolution> {
        let n = self.n();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::Shape("bound vectors do not match the objective".into()));
        }
        if let Some(r) = self.rows.iter().find(|r| r.coeffs.len() != n) {
            return Err(Error::Shape(format!("row has {} coefficients, expected {n}", r.coeffs.len())));
        }
        for j in 0..n {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if !(lo <= hi) {
                return Err(Error::Infeasible(format!("variable {j} has bounds [{lo}, {hi}]")));
            }
        }
        if let Some(i) = self.rows.iter().position(|r| !r.rhs.is_finite() || r.coeffs.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidParameter(format!("row {i} has non-finite entries")));
        }
        let mut problem = Problem::new(OptimizationDirection::Minimize);
        let vars: Vec<_> = (0..n).map(|j| problem.add_var(self.c[j], (self.lower[j], self.upper[j]))).collect();
        for r in &self.rows {
            let terms: Vec<_> = r.coeffs.iter().zip(&vars).filter(|(a, _)| **a != 0.0).map(|(a, v)| (*v, *a)).collect();
            let op = match r.kind {
                RowKind::Le => ComparisonOp::Le,
                RowKind::Ge => ComparisonOp::Ge,
                RowKind::Eq => ComparisonOp::Eq,
            };
            problem.add_constraint(terms.as_slice(), op, r.rhs);
        }
        let outcome = problem.solve().map_err(|e| match e {
            microlp::Error::Infeasible => Error::Infeasible("constraints cannot be satisfied".into()),
            microlp::Error::Unbounded => Error::Unbounded("objective decreases without limit".into()),
            other => Error::NoConvergence(format!("LP solver failed: {other:?}")),
        })?;
        let sol = outcome.into_solution().map_err(|_| Error::NoConvergence("LP solve interrupted".into()))?;
        let x: Vec<f64> = vars.iter().map(|&v| sol.var_value(v)).collect();
        let scale = 1.0 + self.rows.iter().map(|r| r.rhs.abs()).fold(0.0, f64::max);
        let violation = self.violation(&x);
        if violation > 1e-7 * scale {
            return Err(Error::NoConvergence(format!("LP solution violates the constraints by {violation:e}")));
        }
        let objective = x.iter().zip(&self.c).map(|(a, b)| a * b).sum();
        Ok(LpSolution { x, objective })
    }
}
