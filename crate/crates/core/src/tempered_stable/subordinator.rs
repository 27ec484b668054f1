use num_complex::Complex64;
use rand::Rng;

use super::SubordinatorParams;
use crate::error::{Error, Result};
use crate::rng;

/// Characteristic function
/// `exp(-(2 theta^(1 - lambda/2) / lambda) ((theta - i u)^(lambda/2) - theta^(lambda/2)))`.
///
/// Defined for complex `u` with `Re(theta - i u) > 0`, i.e. `Im(u) > -theta`.
pub fn subordinator_cf(u: Complex64, p: &SubordinatorParams) -> Result<Complex64> {
    let base = Complex64::new(p.theta, 0.0) - Complex64::i() * u;
    if !(base.re > 0.0) {
        return Err(Error::OutsideStrip(format!("Re(theta - i u) = {} <= 0", base.re)));
    }
    Ok(cf_unchecked(u, p.lambda, p.theta))
}

#[inline]
pub(crate) fn cf_unchecked(u: Complex64, lambda: f64, theta: f64) -> Complex64 {
    let a = lambda / 2.0;
    let scale = 2.0 * theta.powf(1.0 - a) / lambda;
    let base = Complex64::new(theta, 0.0) - Complex64::i() * u;
    (-(base.powf(a) - theta.powf(a)) * scale).exp()
}

/// Positive `a`-stable draw with Laplace transform `exp(-s^a)` (Kanter's
/// representation), returned on the log scale.
fn log_positive_stable<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    let u: f64 = std::f64::consts::PI * rng.random::<f64>();
    let e: f64 = -(1.0 - rng.random::<f64>()).ln();
    let u = u.max(1e-300);
    (a * u).sin().ln() - (u.sin().ln()) / a + ((1.0 - a) / a) * (((1.0 - a) * u).sin().ln() - e.ln())
}

/// One subordinator draw.
///
/// The Laplace exponent `c((theta + s)^a - theta^a)`, `a = lambda/2`,
/// `c = theta^(1-a)/a`, is split into `k = ceil(theta / a)` equal pieces.
/// Each piece is an exponentially tilted positive stable variable drawn by
/// rejection from its untilted stable proposal, accepting with probability
/// `exp(-theta S)`; per-piece acceptance is `exp(-theta/(a k)) >= 1/e`.
pub fn sample_subordinator_one<R: Rng + ?Sized>(p: &SubordinatorParams, rng: &mut R) -> f64 {
    let a = p.lambda / 2.0;
    let c = p.theta.powf(1.0 - a) / a;
    let pieces = (p.theta / a).ceil().max(1.0) as usize;
    let log_scale = (c / pieces as f64).ln() / a;
    let mut total = 0.0;
    for _ in 0..pieces {
        loop {
            let s = (log_scale + log_positive_stable(a, rng)).exp();
            if !s.is_finite() {
                continue;
            }
            let accept: f64 = rng.random();
            if accept < (-p.theta * s).exp() {
                total += s;
                break;
            }
        }
    }
    total
}

/// `count` i.i.d. subordinator draws from the stream seeded by `seed`.
pub fn subordinator_sample(p: &SubordinatorParams, count: usize, seed: u64) -> Vec<f64> {
    let mut r = rng::stream(seed, rng::domain::SUBORDINATOR, 0);
    (0..count).map(|_| sample_subordinator_one(p, &mut r)).collect()
}
