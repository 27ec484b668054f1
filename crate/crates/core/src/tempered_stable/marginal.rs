//! Univariate NTS margin evaluated by Fourier inversion.
//!
//! Conditioning on `T`, `X = mu + nu (T - 1) + sqrt(T) gamma xi` with scalar
//! standard normal `xi`, so
//!
//! ```text
//! E[exp(i u X)] = exp(i u (mu - nu)) E[exp(i u nu T - u^2 gamma^2 T / 2)]
//!              = exp(i u (mu - nu)) phi_T(u nu + i u^2 gamma^2 / 2).
//! ```
//!
//! The argument of `phi_T` has `Re(theta - i z) = theta + u^2 gamma^2 / 2 > 0`
//! so it stays inside the analyticity strip for every real `u`.
//!
//! Density and distribution function use midpoint sums on `(0, cutoff)`:
//! `f(x) = (1/pi) int Re(e^{-iux} phi(u)) du` and
//! `F(x) = 1/2 - (1/pi) int Im(e^{-iux} phi(u)) / u du`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{std_gamma, subordinator::cf_unchecked};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionGrid {
    /// Frequency cutoff.
    pub cutoff: f64,
    /// Number of frequency nodes.
    pub points: usize,
}

impl Default for InversionGrid {
    fn default() -> Self {
        Self { cutoff: 128.0, points: 8192 }
    }
}

impl InversionGrid {
    /// Cheaper grid used inside calibration loops.
    pub fn coarse() -> Self {
        Self { cutoff: 64.0, points: 2048 }
    }
}

#[derive(Debug, Clone)]
pub struct NtsMarginal {
    pub lambda: f64,
    pub theta: f64,
    pub nu: f64,
    pub gamma: f64,
    pub mu: f64,
    step: f64,
    /// `phi_X(u_j)` at midpoints `u_j = (j + 1/2) step`, cut after the
    /// last node with modulus above `PHI_FLOOR`.
    phi: Vec<Complex64>,
    /// `phi_X(u_j) / u_j` on the same nodes.
    phi_u: Vec<Complex64>,
    /// Modulus at the grid cutoff.
    tail: f64,
}

const PHI_FLOOR: f64 = 1e-16;

impl NtsMarginal {
    pub fn new(lambda: f64, theta: f64, nu: f64, gamma: f64, mu: f64, grid: InversionGrid) -> Self {
        let step = grid.cutoff / grid.points as f64;
        let mut phi: Vec<Complex64> = Vec::with_capacity(grid.points);
        let mut below = 0;
        for j in 0..grid.points {
            let p = cf_value((j as f64 + 0.5) * step, lambda, theta, nu, gamma, mu);
            below = if p.norm() <= PHI_FLOOR { below + 1 } else { 0 };
            phi.push(p);
            if below >= 32 {
                break;
            }
        }
        let tail = phi.last().map_or(0.0, |p| p.norm());
        let keep = phi.iter().rposition(|p| !(p.norm() <= PHI_FLOOR)).map_or(0, |j| j + 1);
        phi.truncate(keep);
        let phi_u = phi.iter().enumerate().map(|(j, p)| p / ((j as f64 + 0.5) * step)).collect();
        Self { lambda, theta, nu, gamma, mu, step, phi, phi_u, tail }
    }

    /// Standardized margin (`mu = 0`, `gamma` implied by `nu`).
    pub fn standard(lambda: f64, theta: f64, nu: f64, grid: InversionGrid) -> Self {
        Self::new(lambda, theta, nu, std_gamma(lambda, theta, nu), 0.0, grid)
    }

    /// Like [`NtsMarginal::standard`] but fails when the grid does not
    /// resolve the density (normalization drift above `1e-3`).
    pub fn standard_checked(lambda: f64, theta: f64, nu: f64, grid: InversionGrid) -> Result<Self> {
        let m = Self::standard(lambda, theta, nu, grid);
        let drift = m.normalization_drift();
        if !(drift <= 1e-3) {
            return Err(Error::GridTooCoarse { drift });
        }
        Ok(m)
    }

    pub fn cf(&self, u: f64) -> Complex64 {
        cf_value(u, self.lambda, self.theta, self.nu, self.gamma, self.mu)
    }

    /// Modulus of the cf at the last grid node; large values mean the
    /// frequency cutoff truncates mass.
    pub fn tail_cf(&self) -> f64 {
        self.tail
    }

    fn rotations(&self, x: f64) -> (Complex64, Complex64) {
        let w0 = Complex64::from_polar(1.0, -0.5 * self.step * x);
        let r = Complex64::from_polar(1.0, -self.step * x);
        (w0, r)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let (mut w, r) = self.rotations(x);
        let mut acc = 0.0;
        for (j, p) in self.phi.iter().enumerate() {
            acc += (w * p).re;
            w *= r;
            if j % 1024 == 1023 {
                w = Complex64::from_polar(1.0, -((j + 1) as f64 + 0.5) * self.step * x);
            }
        }
        (acc * self.step / std::f64::consts::PI).max(0.0)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (mut w, r) = self.rotations(x);
        let mut acc = 0.0;
        for (j, p) in self.phi_u.iter().enumerate() {
            acc += w.re * p.im + w.im * p.re;
            w *= r;
            if j % 1024 == 1023 {
                w = Complex64::from_polar(1.0, -((j + 1) as f64 + 0.5) * self.step * x);
            }
        }
        (0.5 - acc * self.step / std::f64::consts::PI).clamp(0.0, 1.0)
    }

    /// `|int_{-L}^{L} f - 1|` by composite Simpson on a fine grid, with
    /// `L = 12 + 6|nu|` covering the bulk of a standardized margin.
    pub fn normalization_drift(&self) -> f64 {
        let half = 12.0 + 6.0 * self.nu.abs() + self.mu.abs();
        (self.integrate_pdf(self.mu - half, self.mu + half, 4000) - 1.0).abs()
    }

    /// Composite Simpson integral of the density on `[a, b]` with `n` (even) panels.
    pub fn integrate_pdf(&self, a: f64, b: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (b - a) / n as f64;
        let mut s = self.pdf(a) + self.pdf(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * self.pdf(a + i as f64 * h);
        }
        s * h / 3.0
    }
}

fn cf_value(u: f64, lambda: f64, theta: f64, nu: f64, gamma: f64, mu: f64) -> Complex64 {
    let z = Complex64::new(u * nu, 0.5 * u * u * gamma * gamma);
    let shift = Complex64::new(0.0, u * (mu - nu)).exp();
    shift * cf_unchecked(z, lambda, theta)
}
