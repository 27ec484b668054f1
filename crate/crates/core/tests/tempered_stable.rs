use mrsmnts::rng;
use mrsmnts::stats;
use mrsmnts::tempered_stable::*;

fn sample_var_se(xs: &[f64]) -> f64 {
    // standard error of the sample variance from the fourth central moment
    let n = xs.len() as f64;
    let m = stats::mean(xs);
    let m2 = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    ((m4 - m2 * m2) / n).sqrt()
}

#[test]
fn subordinator_moments_match_cf_derivatives() {
    let p = SubordinatorParams::new(1.2, 1.0).unwrap();
    let n = 1_000_000;
    let t = subordinator_sample(&p, n, 2024);
    let mean = stats::mean(&t);
    let se = stats::std_dev(&t) / (n as f64).sqrt();
    assert!((mean - 1.0).abs() < 4.0 * se, "mean {mean} se {se}");
    let var = stats::variance(&t);
    assert!((var - p.variance()).abs() < 4.0 * sample_var_se(&t), "var {var} expect {}", p.variance());
}

#[test]
fn covariance_identity_holds_for_draws() {
    let sigma = vec![vec![1.0, 0.4, -0.2], vec![0.4, 1.0, 0.1], vec![-0.2, 0.1, 1.0]];
    let p = StdMntsParams::new(1.4, 2.0, vec![0.3, -0.5, 0.1], sigma).unwrap();
    let xs = mnts_sample(&p.to_mnts(), 400_000, 77).unwrap();
    let emp = stats::covariance(&xs);
    let cov = p.covariance();
    let n = xs.len() as f64;
    for i in 0..3 {
        for j in 0..3 {
            let prod: Vec<f64> = xs.iter().map(|r| r[i] * r[j]).collect();
            let se = stats::std_dev(&prod) / n.sqrt();
            assert!((emp[(i, j)] - cov[(i, j)]).abs() < 5.0 * se, "({i},{j}) {} vs {}", emp[(i, j)], cov[(i, j)]);
        }
    }
}

#[test]
fn inverted_cdf_matches_empirical_distribution() {
    let p = StdMntsParams::new(0.9, 0.7, vec![-0.4], vec![vec![1.0]]).unwrap();
    let xs: Vec<f64> = mnts_sample(&p.to_mnts(), 100_000, 5).unwrap().into_iter().map(|r| r[0]).collect();
    let m = p.marginal(0, InversionGrid::default());
    let d = stats::ks_statistic(&xs, |x| m.cdf(x));
    assert!(d <= 0.01, "Kolmogorov distance {d}");
}

#[test]
fn tail_parameters_are_recovered_from_simulated_residuals() {
    // a single sample wanders along the lambda/theta ridge, so check the median over replicates
    let p = StdMntsParams::new(1.2, 1.0, vec![0.0], vec![vec![1.0]]).unwrap();
    let mut lambdas = Vec::new();
    let mut thetas = Vec::new();
    for seed in 31..36 {
        let xs: Vec<f64> = mnts_sample(&p.to_mnts(), 100_000, seed).unwrap().into_iter().map(|r| r[0]).collect();
        let fit = fit_tail_params(&xs, SubordinatorParams::new(1.0, 1.0).unwrap()).unwrap();
        assert!(!fit.small_sample);
        lambdas.push(fit.lambda);
        thetas.push(fit.theta);
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let (l, t) = (median(&mut lambdas), median(&mut thetas));
    assert!((l - 1.2).abs() < 0.15 && (t - 1.0).abs() < 0.15, "{lambdas:?} {thetas:?}");
}

#[test]
fn gaussian_residuals_push_lambda_up() {
    use rand_distr::{Distribution, StandardNormal};
    let mut r = rng::from_seed(3);
    let xs: Vec<f64> = (0..20_000).map(|_| StandardNormal.sample(&mut r)).collect();
    let fit = fit_tail_params(&xs, SubordinatorParams::new(1.0, 1.0).unwrap()).unwrap();
    // near-Gaussian means Var[T] = (2 - lambda)/(2 theta) close to zero
    assert!(fit.lambda > 1.5, "{fit:?}");
}

#[test]
fn skew_is_recovered_from_simulated_residuals() {
    let p = StdMntsParams::new(1.2, 1.0, vec![0.3], vec![vec![1.0]]).unwrap();
    let xs: Vec<f64> = mnts_sample(&p.to_mnts(), 100_000, 41).unwrap().into_iter().map(|r| r[0]).collect();
    let fit = fit_skew(&xs, 1.2, 1.0).unwrap();
    assert!((fit.nu - 0.3).abs() < 0.05, "{fit:?}");
    assert!((fit.gamma - std_gamma(1.2, 1.0, fit.nu)).abs() < 1e-15);
}
