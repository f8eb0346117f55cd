use super::*;
use crate::model::{normalize_columns, DesignMatrix};
use crate::penalties::{sqrt_lasso_lambda, sqrt_slope_lambdas};
use ndarray::{array, Array1};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn random_data(n: usize, p: usize, s: usize, sigma: f64, seed: u64) -> RegressionData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries: Vec<f64> = (0..n * p).map(|_| StandardNormal.sample(&mut rng)).collect();
    let x = normalize_columns(&DesignMatrix::from_rows(n, p, entries).unwrap()).unwrap();
    let mut beta = Array1::zeros(p);
    for j in 0..s {
        beta[j] = if j % 2 == 0 { 1.0 } else { -1.5 };
    }
    let noise: Array1<f64> = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sigma * z
        })
        .collect();
    let y = x.mul(beta.view()) + noise;
    RegressionData::new(x, y).unwrap()
}

fn null_threshold(data: &RegressionData) -> f64 {
    let y = data.response();
    let g = data.design().tmul(y);
    let yn = (data.n() as f64).sqrt() * y.dot(&y).sqrt();
    g.iter().fold(0.0_f64, |m, v| m.max(v.abs())) / yn
}

#[test]
fn lambda_above_null_threshold_gives_zero() {
    let data = random_data(30, 40, 3, 0.5, 1);
    let lam = null_threshold(&data) * 1.0001;
    let fit = fit_sqrt_lasso(&data, lam, &SolverConfig::default()).unwrap();
    assert!(fit.beta_hat.iter().all(|&b| b == 0.0));
    assert!(fit.converged);
    let y_norm = empirical_norm_unchecked(data.response());
    assert_eq!(fit.sigma_hat, y_norm);
}

#[test]
fn zero_response_is_degenerate() {
    let data = random_data(10, 5, 0, 0.0, 2);
    let fit = fit_sqrt_lasso(&data, 0.1, &SolverConfig::default()).unwrap();
    assert!(fit.degenerate && !fit.converged);
    assert_eq!(fit.sigma_hat, 0.0);
    assert!(fit.beta_hat.iter().all(|&b| b == 0.0));
    let l = sqrt_slope_lambdas(10, 5, 1.0).unwrap();
    let fit = fit_sqrt_slope(&data, &l, &SolverConfig::default()).unwrap();
    assert!(fit.degenerate);
    assert!(fit.beta_hat.iter().all(|&b| b == 0.0));
}

#[test]
fn interpolation_is_flagged() {
    // With p ≫ n and a tiny λ the minimizer interpolates.
    let data = random_data(6, 30, 2, 1.0, 3);
    let fit = fit_sqrt_lasso(&data, 1e-4, &SolverConfig::default()).unwrap();
    assert!(fit.degenerate);
    assert!(!fit.converged);
}

#[test]
fn rejects_unnormalized_design() {
    let x = DesignMatrix::from_rows(2, 1, vec![3.0, 3.0]).unwrap();
    let data = RegressionData::new(x, array![1.0, 2.0]).unwrap();
    assert!(matches!(
        fit_sqrt_lasso(&data, 0.1, &SolverConfig::default()),
        Err(Error::NotNormalized(_))
    ));
}

#[test]
fn lasso_fit_is_certified() {
    let data = random_data(100, 200, 5, 1.0, 4);
    let lam = sqrt_lasso_lambda(100, 200, 5, 1.2).unwrap();
    let cfg = SolverConfig::default();
    let fit = fit_sqrt_lasso(&data, lam, &cfg).unwrap();
    assert!(fit.converged, "{fit:?}");
    assert!(fit.kkt_residual <= cfg.kkt_tol);
    let pen = Penalty::l1(lam).unwrap();
    let recomputed = kkt_residual(&data, fit.beta_hat.view(), &pen).unwrap();
    assert!(recomputed <= 1.5 * cfg.kkt_tol, "{recomputed}");
    let r = crate::model::residual(&data, fit.beta_hat.view()).unwrap();
    assert!((fit.sigma_hat - empirical_norm_unchecked(r.view())).abs() < 1e-10);
    assert!((fit.objective - fit.sigma_hat - pen.value(fit.beta_hat.as_slice().unwrap())).abs() < 1e-10);

    // A visible perturbation breaks the certificate.
    let mut moved = fit.beta_hat.clone();
    moved[0] += 0.5;
    assert!(kkt_residual(&data, moved.view(), &pen).unwrap() > cfg.kkt_tol);
}

#[test]
fn slope_with_equal_weights_matches_lasso() {
    let data = random_data(50, 80, 4, 1.0, 5);
    let lam = sqrt_lasso_lambda(50, 80, 4, 1.0).unwrap();
    let cfg = SolverConfig::default();
    let a = fit_sqrt_lasso(&data, lam, &cfg).unwrap();
    let b = fit_sqrt_slope(&data, &LambdaSequence::constant(80, lam).unwrap(), &cfg).unwrap();
    assert!(a.converged && b.converged);
    let diff = (&a.beta_hat - &b.beta_hat)
        .mapv(|v: f64| v.abs())
        .fold(0.0_f64, |m, v| m.max(*v));
    assert!(diff < 1e-6, "{diff}");
}

#[test]
fn slope_fit_is_certified() {
    let data = random_data(80, 150, 6, 0.7, 6);
    let l = sqrt_slope_lambdas(80, 150, 1.1).unwrap();
    let cfg = SolverConfig::default();
    let fit = fit_sqrt_slope(&data, &l, &cfg).unwrap();
    assert!(fit.converged, "{fit:?}");
    let pen = Penalty::Sorted(l);
    assert!(kkt_residual(&data, fit.beta_hat.view(), &pen).unwrap() <= 1.5 * cfg.kkt_tol);
}

#[test]
fn theory_gamma_converges() {
    // Large γ makes the plain alternation contract slowly.
    let data = random_data(200, 300, 3, 1.0, 7);
    let lam = sqrt_lasso_lambda(200, 300, 3, crate::penalties::THEORY_GAMMA / 8.0).unwrap();
    let fit = fit_sqrt_lasso(&data, lam, &SolverConfig::default()).unwrap();
    assert!(fit.converged, "{fit:?}");
    assert!(fit.outer_iters < 60, "{}", fit.outer_iters);
}

#[test]
fn scale_equivariance() {
    let data = random_data(40, 60, 3, 1.0, 8);
    let cfg = SolverConfig::default();
    let lam = sqrt_lasso_lambda(40, 60, 3, 1.0).unwrap();
    let l = sqrt_slope_lambdas(40, 60, 1.0).unwrap();
    let base_a = fit_sqrt_lasso(&data, lam, &cfg).unwrap();
    let base_b = fit_sqrt_slope(&data, &l, &cfg).unwrap();
    for c in [0.1, 10.0, 1234.5] {
        let scaled = data.scaled_response(c);
        let a = fit_sqrt_lasso(&scaled, lam, &cfg).unwrap();
        let b = fit_sqrt_slope(&scaled, &l, &cfg).unwrap();
        for (fit, base) in [(&a, &base_a), (&b, &base_b)] {
            let err = (&fit.beta_hat - &(&base.beta_hat * c)).mapv(|v: f64| v.abs()).sum();
            assert!(
                err <= 1e-6 * c * base.beta_hat.mapv(|v: f64| v.abs()).sum(),
                "c={c} err={err}"
            );
            assert!((fit.sigma_hat - c * base.sigma_hat).abs() <= 1e-6 * c * base.sigma_hat);
        }
    }
}

#[test]
fn joint_objective_never_increases() {
    for seed in 0..5 {
        let data = random_data(60, 100, 4, 1.0, 100 + seed);
        let lam = sqrt_lasso_lambda(60, 100, 4, 2.0).unwrap();
        let fit = fit_sqrt_lasso(&data, lam, &SolverConfig::default()).unwrap();
        for w in fit.objective_trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "{:?}", fit.objective_trace);
        }
    }
}

#[test]
fn fits_are_deterministic() {
    let data = random_data(40, 60, 3, 1.0, 9);
    let l = sqrt_slope_lambdas(40, 60, 1.0).unwrap();
    let a = fit_sqrt_slope(&data, &l, &SolverConfig::default()).unwrap();
    let b = fit_sqrt_slope(&data, &l, &SolverConfig::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn fixed_step_policy_agrees_with_backtracking() {
    let data = random_data(50, 70, 4, 1.0, 10);
    let lam = sqrt_lasso_lambda(50, 70, 4, 1.0).unwrap();
    let a = fit_sqrt_lasso(&data, lam, &SolverConfig::default()).unwrap();
    let cfg = SolverConfig {
        step_policy: StepPolicy::Fixed,
        ..SolverConfig::default()
    };
    let b = fit_sqrt_lasso(&data, lam, &cfg).unwrap();
    assert!(b.converged);
    assert!((a.objective - b.objective).abs() < 1e-10);
}

#[test]
fn fixed_scale_examples() {
    let data = random_data(30, 20, 3, 1.0, 11);
    let cfg = SolverConfig::default();
    // Weights beyond the zero-solution threshold.
    let big = sqrt_slope_lambdas(30, 20, 1.0).unwrap().scaled(1e6);
    let b = fit_slope_fixed_scale(&data, &big, 1.0, &cfg).unwrap();
    assert!(b.iter().all(|&v| v == 0.0));

    let zero = data.scaled_response(0.0);
    let l = sqrt_slope_lambdas(30, 20, 1.0).unwrap();
    assert!(fit_slope_fixed_scale(&zero, &l, 0.7, &cfg)
        .unwrap()
        .iter()
        .all(|&v| v == 0.0));

    // One column: minimize (1/(2s))‖y − xb‖_n² + λ|b| ⇒ b = soft(xᵀy/n, sλ).
    let x = normalize_columns(&DesignMatrix::from_rows(4, 1, vec![1.0, -2.0, 0.5, 3.0]).unwrap()).unwrap();
    let y = array![2.0, -1.0, 0.3, 4.0];
    let c = x.column(0).dot(&y) / 4.0;
    let data = RegressionData::new(x, y).unwrap();
    let (scale, lam) = (0.8, 0.9);
    let b = fit_slope_fixed_scale(&data, &LambdaSequence::constant(1, lam).unwrap(), scale, &cfg).unwrap();
    let expected = crate::penalties::soft(c, scale * lam);
    assert!((b[0] - expected).abs() < 1e-12, "{} vs {expected}", b[0]);
}

#[test]
fn degenerate_residual_has_no_certificate() {
    let x = normalize_columns(&DesignMatrix::from_rows(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap()).unwrap();
    let y = x.mul(array![0.5, -0.25].view());
    let data = RegressionData::new(x, y).unwrap();
    let pen = Penalty::l1(0.1).unwrap();
    assert!(matches!(
        kkt_residual(&data, array![0.5, -0.25].view(), &pen),
        Err(Error::DegenerateResidual)
    ));
}
