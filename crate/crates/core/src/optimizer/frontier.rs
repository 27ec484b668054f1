use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{min_risk, AllocationProblem, ScenarioSet, WeightBounds};
use crate::error::{Error, Result};
use crate::risk::RiskMeasure;

/// Default expected-return floors of the frontier sweep.
pub const DEFAULT_FLOORS: [f64; 10] = [0.002, 0.010, 0.020, 0.030, 0.035, 0.040, 0.045, 0.050, 0.060, 0.065];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub label: String,
    pub d: f64,
    pub weights: Vec<f64>,
    pub risk: f64,
    pub expected_return: f64,
    pub ratio: f64,
    /// False when the floor was infeasible and the allocation was taken
    /// from the nearest feasible lower floor.
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frontier {
    pub measure: RiskMeasure,
    pub points: Vec<FrontierPoint>,
    pub optimal: usize,
}

fn ratio(expected: f64, risk: f64) -> f64 {
    let r = expected / risk;
    if r.is_nan() {
        f64::NEG_INFINITY
    } else {
        r
    }
}

/// Label of point `i` relative to the optimal index.
pub fn label(i: usize, optimal: usize) -> String {
    match i.cmp(&optimal) {
        std::cmp::Ordering::Less => format!("L{}", optimal - i),
        std::cmp::Ordering::Equal => "Optimal".into(),
        std::cmp::Ordering::Greater => format!("H{}", i - optimal),
    }
}

/// Solves one minimum-risk problem per floor (floors ascending) and picks
/// the point with the highest return-to-risk ratio.
pub fn frontier(set: &ScenarioSet, measure: RiskMeasure, floors: &[f64], bounds: WeightBounds) -> Result<Frontier> {
    if floors.is_empty() {
        return Err(Error::InvalidParameter("no return floors given".into()));
    }
    if floors.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::InvalidParameter("return floors must be ascending".into()));
    }
    let solved: Vec<Result<super::Allocation>> =
        floors.par_iter().map(|&floor| min_risk(set, &AllocationProblem { measure, floor, bounds })).collect();
    let mut points: Vec<FrontierPoint> = Vec::with_capacity(floors.len());
    let mut last_feasible: Option<usize> = None;
    for (i, (res, &d)) in solved.into_iter().zip(floors).enumerate() {
        match res {
            Ok(a) => {
                last_feasible = Some(i);
                points.push(FrontierPoint {
                    label: String::new(),
                    d,
                    ratio: ratio(a.expected_return, a.risk),
                    weights: a.weights,
                    risk: a.risk,
                    expected_return: a.expected_return,
                    feasible: true,
                });
            }
            Err(Error::Infeasible(_)) => match last_feasible {
                Some(j) => {
                    let src = points[j].clone();
                    points.push(FrontierPoint { d, feasible: false, ..src });
                }
                None => points.push(FrontierPoint {
                    label: String::new(),
                    d,
                    weights: Vec::new(),
                    risk: f64::NAN,
                    expected_return: f64::NAN,
                    ratio: f64::NEG_INFINITY,
                    feasible: false,
                }),
            },
            Err(e) => return Err(e),
        }
    }
    let Some(first) = points.iter().position(|p| p.feasible) else {
        return Err(Error::Infeasible("every return floor is infeasible".into()));
    };
    // Floors below the first feasible one (possible only through rounding)
    // take its allocation too.
    for i in 0..first {
        let src = points[first].clone();
        points[i] = FrontierPoint { d: points[i].d, feasible: false, ..src };
    }
    let mut optimal = 0;
    for (i, p) in points.iter().enumerate() {
        if p.ratio > points[optimal].ratio {
            optimal = i;
        }
    }
    for (i, p) in points.iter_mut().enumerate() {
        p.label = label(i, optimal);
    }
    Ok(Frontier { measure, points, optimal })
}

impl Frontier {
    pub fn optimal_point(&self) -> &FrontierPoint {
        &self.points[self.optimal]
    }

    pub fn point(&self, label: &str) -> Option<&FrontierPoint> {
        self.points.iter().find(|p| p.label == label)
    }

    /// `label,d,<asset>...,risk,expected_return,ratio,feasible`.
    pub fn write_csv<W: Write>(&self, w: W, assets: &[String]) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["label".to_string(), "d".into()];
        header.extend(assets.iter().cloned());
        header.extend(["risk", "expected_return", "ratio", "feasible"].map(String::from));
        out.write_record(&header)?;
        for p in &self.points {
            let mut rec = vec![p.label.clone(), p.d.to_string()];
            rec.extend(p.weights.iter().map(|v| v.to_string()));
            rec.extend([p.risk.to_string(), p.expected_return.to_string(), p.ratio.to_string(), p.feasible.to_string()]);
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_are_relative_to_the_optimum() {
        let got: Vec<String> = (0..6).map(|i| label(i, 2)).collect();
        assert_eq!(got, ["L2", "L1", "Optimal", "H1", "H2", "H3"]);
    }
}
