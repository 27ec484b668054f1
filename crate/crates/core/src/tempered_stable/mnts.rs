use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{sample_subordinator_one, MntsParams, SubordinatorParams};
use crate::error::{Error, Result};
use crate::rng;

/// Draws MNTS vectors: `X = mu + nu (T - 1) + sqrt(T) gamma * (L z)` with
/// `L L^T = Sigma` and `T` independent of `z`.
#[derive(Debug, Clone)]
pub struct MntsSampler {
    params: MntsParams,
    sub: SubordinatorParams,
    chol: DMatrix<f64>,
}

impl MntsSampler {
    pub fn new(params: MntsParams) -> Result<Self> {
        params.validate()?;
        let chol = params
            .sigma_matrix()
            .cholesky()
            .ok_or_else(|| Error::InvalidParameter("sigma is not positive definite".into()))?
            .l();
        let sub = params.subordinator();
        Ok(Self { params, sub, chol })
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    /// Writes one draw into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let n = self.dim();
        let mut z = [0.0f64; 64];
        let mut zv;
        let z: &mut [f64] = if n <= 64 {
            &mut z[..n]
        } else {
            zv = vec![0.0; n];
            &mut zv
        };
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        let t = sample_subordinator_one(&self.sub, rng);
        let st = t.sqrt();
        let p = &self.params;
        for i in 0..n {
            let xi: f64 = (0..=i).map(|j| self.chol[(i, j)] * z[j]).sum();
            out[i] = p.mu[i] + p.nu[i] * (t - 1.0) + st * p.gamma[i] * xi;
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.sample_into(rng, &mut out);
        out
    }
}

/// `count × N` MNTS draws from the stream seeded by `seed`.
pub fn mnts_sample(params: &MntsParams, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let sampler = MntsSampler::new(params.clone())?;
    let mut r = rng::stream(seed, rng::domain::MNTS, 0);
    Ok((0..count).map(|_| sampler.sample(&mut r)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;
    use crate::tempered_stable::StdMntsParams;

    #[test]
    fn symmetric_case_is_centered_with_unit_variance() {
        let p = StdMntsParams::new(1.2, 1.0, vec![0.0, 0.0], vec![vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        assert_eq!(p.gamma(), vec![1.0, 1.0]);
        let n = 200_000;
        let xs = mnts_sample(&p.to_mnts(), n, 3).unwrap();
        for j in 0..2 {
            let col: Vec<f64> = xs.iter().map(|r| r[j]).collect();
            let se = 1.0 / (n as f64).sqrt();
            assert!(stats::mean(&col).abs() < 5.0 * se);
            // var of sample variance ~ (kurtosis - 1)/n with kurtosis 3(1 + Var T) = 4.2
            assert!((stats::variance(&col) - 1.0).abs() < 5.0 * (3.2f64 / n as f64).sqrt());
        }
    }

    #[test]
    fn near_degenerate_subordinator_gives_gaussian_draws() {
        // lambda close to 2 makes T ~ 1, so X ~ mu + gamma * xi
        let p = MntsParams {
            lambda: 1.999_999,
            theta: 1.0,
            mu: vec![0.5],
            nu: vec![0.3],
            gamma: vec![2.0],
            sigma: vec![vec![1.0]],
        };
        let sampler = MntsSampler::new(p).unwrap();
        let mut r1 = rng::from_seed(5);
        let t = sample_subordinator_one(&SubordinatorParams::new(1.999_999, 1.0).unwrap(), &mut r1);
        assert!((t - 1.0).abs() < 0.01, "T = {t}");
        let mut r = rng::from_seed(9);
        let xs: Vec<f64> = (0..50_000).map(|_| sampler.sample(&mut r)[0]).collect();
        assert!((stats::mean(&xs) - 0.5).abs() < 0.05);
        assert!((stats::std_dev(&xs) - 2.0).abs() < 0.05);
    }

    #[test]
    fn draws_are_deterministic() {
        let p = StdMntsParams::new(0.8, 0.5, vec![0.2], vec![vec![1.0]]).unwrap().to_mnts();
        assert_eq!(mnts_sample(&p, 100, 1).unwrap(), mnts_sample(&p, 100, 1).unwrap());
    }
}
