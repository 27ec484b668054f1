//! Derivative-free and quasi-Newton minimizers used by the estimators.
//!
//! All routines minimize; objectives may return `f64::INFINITY` (or NaN,
//! treated as infinity) to reject a point.

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NelderMead {
    pub max_evals: usize,
    pub f_tol: f64,
    pub x_tol: f64,
    pub initial_step: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self { max_evals: 2000, f_tol: 1e-10, x_tol: 1e-8, initial_step: 0.25 }
    }
}

impl NelderMead {
    pub fn minimize(&self, f: impl Fn(&[f64]) -> f64, x0: &[f64]) -> Minimum {
        let n = x0.len();
        let evals = std::cell::Cell::new(0usize);
        let eval = |x: &[f64]| {
            evals.set(evals.get() + 1);
            sanitize(f(x))
        };
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        simplex.push((x0.to_vec(), eval(x0)));
        for i in 0..n {
            let mut x = x0.to_vec();
            let step = if x[i].abs() > 1e-3 { self.initial_step * x[i].abs().max(1.0) } else { self.initial_step };
            x[i] += step;
            let fx = eval(&x);
            simplex.push((x, fx));
        }
        let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
        let mut converged = false;
        loop {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let best = simplex[0].1;
            let worst = simplex[n].1;
            let spread = (worst - best).abs();
            let size = simplex[1..]
                .iter()
                .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if best.is_finite() && spread <= self.f_tol * (1.0 + best.abs()) && size <= self.x_tol {
                converged = true;
                break;
            }
            if evals.get() >= self.max_evals {
                break;
            }
            let mut centroid = vec![0.0; n];
            for (x, _) in &simplex[..n] {
                for (c, xi) in centroid.iter_mut().zip(x) {
                    *c += xi / n as f64;
                }
            }
            let along = |t: f64| -> Vec<f64> {
                centroid.iter().zip(&simplex[n].0).map(|(c, w)| c + t * (c - w)).collect()
            };
            let xr = along(alpha);
            let fr = eval(&xr);
            if fr < simplex[0].1 {
                let xe = along(gamma);
                let fe = eval(&xe);
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
            } else {
                let (xc, fc) = if fr < simplex[n].1 {
                    let xc = along(rho);
                    let fc = eval(&xc);
                    (xc, fc)
                } else {
                    let xc = along(-rho);
                    let fc = eval(&xc);
                    (xc, fc)
                };
                if fc < simplex[n].1.min(fr) {
                    simplex[n] = (xc, fc);
                } else {
                    let x0 = simplex[0].0.clone();
                    for (x, fx) in simplex.iter_mut().skip(1) {
                        for (xi, bi) in x.iter_mut().zip(&x0) {
                            *xi = bi + sigma * (*xi - bi);
                        }
                        *fx = eval(x);
                    }
                }
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (x, f) = simplex.swap_remove(0);
        Minimum { x, f, evals: evals.get(), converged }
    }
}

/// BFGS with central finite-difference gradients and backtracking line
/// search.
#[derive(Debug, Clone, Copy)]
pub struct Bfgs {
    pub max_iter: usize,
    pub g_tol: f64,
    pub f_tol: f64,
    pub fd_step: f64,
}

impl Default for Bfgs {
    fn default() -> Self {
        Self { max_iter: 300, g_tol: 1e-6, f_tol: 1e-12, fd_step: 1e-6 }
    }
}

impl Bfgs {
    fn gradient(&self, f: &impl Fn(&[f64]) -> f64, x: &[f64], fx: f64, evals: &mut usize) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        let mut xp = x.to_vec();
        for i in 0..x.len() {
            let h = self.fd_step * x[i].abs().max(1.0);
            xp[i] = x[i] + h;
            let fp = sanitize(f(&xp));
            xp[i] = x[i] - h;
            let fm = sanitize(f(&xp));
            xp[i] = x[i];
            *evals += 2;
            g[i] = match (fp.is_finite(), fm.is_finite()) {
                (true, true) => (fp - fm) / (2.0 * h),
                (true, false) => (fp - fx) / h,
                (false, true) => (fx - fm) / h,
                (false, false) => 0.0,
            };
        }
        g
    }

    pub fn minimize(&self, f: impl Fn(&[f64]) -> f64, x0: &[f64]) -> Minimum {
        let n = x0.len();
        let mut evals = 1usize;
        let mut x = x0.to_vec();
        let mut fx = sanitize(f(&x));
        if !fx.is_finite() {
            return Minimum { x, f: fx, evals, converged: false };
        }
        let mut g = self.gradient(&f, &x, fx, &mut evals);
        let mut h = vec![vec![0.0; n]; n];
        for (i, row) in h.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        let mut converged = false;
        let mut stall = 0;
        for _ in 0..self.max_iter {
            let gnorm = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if gnorm < self.g_tol {
                converged = true;
                break;
            }
            let mut d: Vec<f64> = (0..n).map(|i| -(0..n).map(|j| h[i][j] * g[j]).sum::<f64>()).collect();
            let mut slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
            if slope >= 0.0 {
                // lost positive definiteness: reset to steepest descent
                for (i, row) in h.iter_mut().enumerate() {
                    row.iter_mut().for_each(|v| *v = 0.0);
                    row[i] = 1.0;
                }
                d = g.iter().map(|v| -v).collect();
                slope = -g.iter().map(|v| v * v).sum::<f64>();
            }
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
                let fnew = sanitize(f(&xn));
                evals += 1;
                if fnew <= fx + 1e-4 * t * slope {
                    accepted = Some((xn, fnew));
                    break;
                }
                t *= 0.5;
            }
            let Some((xn, fnew)) = accepted else {
                converged = gnorm < self.g_tol * 1e3;
                break;
            };
            let gn = self.gradient(&f, &xn, fnew, &mut evals);
            let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
            if sy > 1e-12 {
                let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[i][j] * y[j]).sum()).collect();
                let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
                let rho = 1.0 / sy;
                for i in 0..n {
                    for j in 0..n {
                        h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                    }
                }
            }
            let df = (fx - fnew).abs();
            x = xn;
            g = gn;
            let prev = fx;
            fx = fnew;
            if df <= self.f_tol * (1.0 + prev.abs()) {
                stall += 1;
                if stall >= 3 {
                    converged = true;
                    break;
                }
            } else {
                stall = 0;
            }
        }
        Minimum { x, f: fx, evals, converged }
    }
}

/// Golden-section search on `[lo, hi]` for a unimodal function.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - inv_phi * (hi - lo);
    let mut b = lo + inv_phi * (hi - lo);
    let mut fa = sanitize(f(a));
    let mut fb = sanitize(f(b));
    while (hi - lo).abs() > tol {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = sanitize(f(a));
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = sanitize(f(b));
        }
    }
    if fa < fb {
        (a, fa)
    } else {
        (b, fb)
    }
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Maps an unconstrained value into `(lo, hi)`.
pub fn to_interval(x: f64, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * logistic(x)
}

pub fn from_interval(v: f64, lo: f64, hi: f64) -> f64 {
    let p = ((v - lo) / (hi - lo)).clamp(1e-9, 1.0 - 1e-9);
    logit(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }

    #[test]
    fn nelder_mead_finds_rosenbrock_minimum() {
        let nm = NelderMead { max_evals: 5000, ..Default::default() };
        let m = nm.minimize(rosenbrock, &[-1.2, 1.0]);
        assert!((m.x[0] - 1.0).abs() < 1e-3 && (m.x[1] - 1.0).abs() < 1e-3, "{:?}", m);
    }

    #[test]
    fn bfgs_finds_rosenbrock_minimum() {
        let m = Bfgs::default().minimize(rosenbrock, &[-1.2, 1.0]);
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{:?}", m);
    }

    #[test]
    fn bfgs_respects_infinite_walls() {
        let f = |x: &[f64]| if x[0] < 0.5 { f64::INFINITY } else { (x[0] - 0.2).powi(2) };
        let m = Bfgs::default().minimize(f, &[2.0]);
        assert!(m.x[0] >= 0.5 && m.x[0] < 0.6, "{:?}", m);
    }

    #[test]
    fn golden_section_on_parabola() {
        let (x, _) = golden_section(|x| (x - 0.3).powi(2), -1.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-8);
    }

    #[test]
    fn interval_transform_round_trips() {
        let v = to_interval(from_interval(0.7, 0.05, 1.95), 0.05, 1.95);
        assert!((v - 0.7).abs() < 1e-12);
    }
}
