use mrsmnts::garch::*;
use mrsmnts::{rng, stats};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

fn plain_garch_loglik(r: &[f64], mu: f64, omega: f64, alpha: f64, beta: f64) -> f64 {
    let mut h = omega / (1.0 - alpha - beta);
    r.iter()
        .map(|x| {
            let e = x - mu;
            let l = -0.5 * (2.0 * std::f64::consts::PI * h).ln() - e * e / (2.0 * h);
            h = omega + alpha * e * e + beta * h;
            l
        })
        .sum()
}

#[test]
fn single_regime_loglik_matches_plain_garch_on_random_draws() {
    let mut r = rng::from_seed(77);
    for i in 0..100 {
        let alpha = r.random_range(0.0..0.3);
        let beta = r.random_range(0.0..(0.99 - alpha));
        let omega = r.random_range(1e-6..1e-3);
        let mu = r.random_range(-1e-3..1e-3);
        let p = MrsGarchParams::single(mu, omega, alpha, beta, Innovation::Normal);
        let data: Vec<f64> = (0..200).map(|_| r.random_range(-0.05..0.05)).collect();
        let ll = loglik(&p, &data).unwrap();
        let want = plain_garch_loglik(&data, mu, omega, alpha, beta);
        assert!((ll - want).abs() <= 1e-8 * want.abs().max(1.0), "draw {i}: {ll} vs {want}");
    }
}

#[test]
fn rescaling_returns_shifts_loglik_by_log_scale() {
    let p = MrsGarchParams {
        eta: vec![0.001, -0.002],
        omega: vec![1e-5, 4e-5],
        alpha: vec![0.05, 0.1],
        beta: vec![0.9, 0.85],
        trans: vec![vec![0.95, 0.05], vec![0.1, 0.9]],
        innovation: Innovation::StudentT { df: 7.0 },
    };
    let (r, _, _) = p.simulate(1000, 5).unwrap();
    let doubled: Vec<f64> = r.iter().map(|x| 2.0 * x).collect();
    let q = MrsGarchParams {
        eta: p.eta.iter().map(|e| 2.0 * e).collect(),
        omega: p.omega.iter().map(|w| 4.0 * w).collect(),
        ..p.clone()
    };
    let shift = loglik(&q, &doubled).unwrap() - loglik(&p, &r).unwrap();
    let want = -(r.len() as f64) * 2f64.ln();
    assert!((shift - want).abs() < 1e-8, "{shift} {want}");
}

/// Characteristic polynomial by Faddeev-LeVerrier, roots by Durand-Kerner.
fn spectral_radius_oracle(m: &nalgebra::DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut coeffs = vec![1.0];
    let mut mk = nalgebra::DMatrix::<f64>::zeros(n, n);
    let id = nalgebra::DMatrix::<f64>::identity(n, n);
    let mut c = 1.0;
    for k in 1..=n {
        mk = m * &mk + &id * c;
        let am = m * &mk;
        c = -am.trace() / k as f64;
        coeffs.push(c);
    }
    let poly = |z: Complex64| coeffs.iter().fold(Complex64::new(0.0, 0.0), |acc, a| acc * z + a);
    let mut roots: Vec<Complex64> = (0..n).map(|i| Complex64::new(0.4, 0.9).powu(i as u32)).collect();
    for _ in 0..2000 {
        let prev = roots.clone();
        for i in 0..n {
            let mut den = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    den *= roots[i] - roots[j];
                }
            }
            let step = poly(roots[i]) / den;
            roots[i] -= step;
        }
        if roots.iter().zip(&prev).all(|(a, b)| (a - b).norm() < 1e-15) {
            break;
        }
    }
    roots.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[test]
fn spectral_radius_matches_characteristic_polynomial_oracle() {
    let mut r = rng::from_seed(12);
    for _ in 0..30 {
        let k = r.random_range(2..=3);
        let mut trans = Vec::new();
        for _ in 0..k {
            let w: Vec<f64> = (0..k).map(|_| r.random_range(0.05..1.0)).collect();
            let s: f64 = w.iter().sum();
            trans.push(w.iter().map(|x| x / s).collect::<Vec<_>>());
        }
        let alpha: Vec<f64> = (0..k).map(|_| r.random_range(0.0..0.3)).collect();
        let beta: Vec<f64> = (0..k).map(|_| r.random_range(0.3..0.95)).collect();
        let p = MrsGarchParams { eta: vec![0.0; k], omega: vec![1.0; k], alpha, beta, trans, innovation: Innovation::Normal };
        let rho = stationarity_spectral_radius(&p);
        let oracle = spectral_radius_oracle(&stationarity_matrix(&p));
        assert!((rho - oracle).abs() < 1e-7, "{rho} {oracle}");
    }
}

#[test]
fn two_regime_transition_matrix_is_recovered() {
    let truth = MrsGarchParams {
        eta: vec![0.0005, -0.0005],
        omega: vec![2e-6, 4e-5],
        alpha: vec![0.04, 0.08],
        beta: vec![0.9, 0.85],
        trans: vec![vec![0.8964, 0.1036], vec![0.2069, 0.7931]],
        innovation: Innovation::Normal,
    };
    let (r, _, _) = truth.simulate(5000, 2024).unwrap();
    let f = fit(&r, 2, InnovationFamily::Normal, 1).unwrap();
    for row in &f.params.trans {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
    assert!((f.params.trans[0][0] - 0.8964).abs() < 0.1, "{:?}", f.params.trans);
    assert!((f.params.trans[1][1] - 0.7931).abs() < 0.1, "{:?}", f.params.trans);
    assert!(f.spectral_radius < 1.0);
    assert_eq!(f.residuals.len(), r.len());
    assert_eq!(f.next_sigma2.len(), 2);
}

#[test]
fn single_regime_fit_on_iid_normal_data() {
    use rand_distr::{Distribution, Normal};
    let mut g = rng::from_seed(8);
    let n = Normal::new(0.0003, 0.01).unwrap();
    let r: Vec<f64> = (0..3000).map(|_| n.sample(&mut g)).collect();
    let f = fit(&r, 1, InnovationFamily::Normal, 3).unwrap();
    assert!(f.params.alpha[0] < 0.05, "{:?}", f.params);
    let m = stats::mean(&r);
    let v = stats::pop_std_dev(&r).powi(2);
    let iid = -0.5 * r.len() as f64 * ((2.0 * std::f64::consts::PI * v).ln() + 1.0);
    assert!(f.loglik >= iid - 1e-6);
    assert!(f.loglik - iid < 5.0, "{} {iid} {m}", f.loglik);
}

#[test]
fn regime_count_selection() {
    use rand_distr::{Distribution, Normal};
    let mut g = rng::from_seed(10);
    let n = Normal::new(0.0, 0.01).unwrap();
    let iid: Vec<f64> = (0..2000).map(|_| n.sample(&mut g)).collect();
    let opts = FitOptions { starts: 4, ..FitOptions::default() };
    let sel = select_regime_count(&iid, InnovationFamily::Normal, 1, &opts).unwrap();
    assert_eq!(sel.chosen, 1, "{:?}", sel.candidates);

    let two = MrsGarchParams {
        eta: vec![0.0, 0.0],
        omega: vec![1e-6, 1e-4],
        alpha: vec![0.02, 0.05],
        beta: vec![0.9, 0.85],
        trans: vec![vec![0.98, 0.02], vec![0.03, 0.97]],
        innovation: Innovation::Normal,
    };
    let (r, _, _) = two.simulate(2000, 6).unwrap();
    let sel = select_regime_count(&r, InnovationFamily::Normal, 1, &opts).unwrap();
    assert_eq!(sel.chosen, 2, "{:?}", sel.candidates);
    let best = sel.candidates.iter().map(|c| c.bic).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(sel.chosen_fit().bic, best);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sel.csv");
    write_selection_csv(&path, &sel).unwrap();
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.starts_with("k,n_params,loglik,bic,spectral_radius,bimodality,chosen"));
    assert_eq!(text.lines().count(), 1 + sel.candidates.len());
}

#[test]
fn residuals_of_well_specified_fits_pass_ks() {
    let truth = MrsGarchParams::single(0.0, 1e-5, 0.08, 0.9, Innovation::Normal);
    let opts = FitOptions { starts: 2, ..FitOptions::default() };
    let mut passed = 0;
    for rep in 0..100u64 {
        let (r, _, _) = truth.simulate(1000, 500 + rep).unwrap();
        let f = fit_with(&r, 1, InnovationFamily::Normal, rep, &opts).unwrap();
        let d = stats::ks_statistic(&f.residuals, |z| f.params.innovation.cdf(z));
        let p = stats::kolmogorov_sf(d * (f.residuals.len() as f64).sqrt());
        passed += usize::from(p > 0.01);
    }
    assert!(passed >= 95, "{passed}/100");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn filter_stays_on_simplex_and_variances_positive(
        seed in 0u64..1000,
        p11 in 0.5f64..0.99,
        p22 in 0.5f64..0.99,
        a in 0.0f64..0.2,
        b in 0.5f64..0.79,
    ) {
        let p = MrsGarchParams {
            eta: vec![0.0, 0.001],
            omega: vec![1e-6, 1e-5],
            alpha: vec![a, a / 2.0],
            beta: vec![b, b + 0.1],
            trans: vec![vec![p11, 1.0 - p11], vec![1.0 - p22, p22]],
            innovation: Innovation::StudentT { df: 5.0 },
        };
        let (r, _, _) = p.simulate(300, seed).unwrap();
        let out = filter(&p, &r).unwrap();
        for (row, s2) in out.filtered.iter().zip(&out.sigma2) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            prop_assert!(row.iter().all(|v| *v >= 0.0));
            prop_assert!(s2.iter().all(|v| *v > 0.0));
        }
    }
}
