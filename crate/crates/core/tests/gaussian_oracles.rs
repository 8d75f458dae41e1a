use approx::assert_relative_eq;
use mrmap::gaussian::{
    bias_var_multivariate, map_1d, map_multivariate, mle_grad_estimate, mse_map_1d, posterior_var_1d,
    theta_hat_1d, theta_star_1d, theta_tilde_1d, Gaussian1DCase,
};
use mrmap::operators::make_latent;
use mrmap::samplers::sample_gaussian_precision;
use mrmap::train::{empirical_mse, GaussianShrinkage};
use mrmap::{ForwardOperator, Matrix, RngStream};
use proptest::prelude::*;

#[test]
fn empirical_mse_of_shrinkage_matches_closed_form() {
    let (theta, sigma) = (1.5, 0.7);
    let x = Matrix::new(3, 4, vec![0.3, -1.0, 2.0, 0.5, 1.2, 0.0, -0.7, 1.9, -2.2, 0.4, 0.8, -0.1]).unwrap();
    let est = GaussianShrinkage { theta, sigma };
    let mc = empirical_mse(&est, &x, sigma, 1.0, 20_000, &RngStream::new(3, 0)).unwrap();
    let exact: f64 = (0..4).map(|j| mse_map_1d(theta, sigma, &x.column(j))).sum::<f64>() / 4.0;
    assert!((mc.mean - exact).abs() <= 4.0 * mc.std_error, "{} vs {exact} (se {})", mc.mean, mc.std_error);
}

#[test]
fn map_bias_and_covariance_match_monte_carlo() {
    let theta = Matrix::from_rows(&[&[2.0, 0.5, 0.0], &[0.5, 1.0, 0.2], &[0.0, 0.2, 1.5]]).unwrap();
    let sigma = 0.4;
    let op = ForwardOperator::mask(3, vec![0, 2]).unwrap();
    let x = [1.0, -0.5, 0.8];
    let (bias, cov) = bias_var_multivariate(&theta, sigma, &op, &x).unwrap();
    let draws = 40_000;
    let mut rng = RngStream::new(5, 0);
    let errors: Vec<Vec<f64>> = (0..draws)
        .map(|_| {
            let datum = make_latent(&x, op.clone(), sigma, &mut rng).unwrap();
            let x_hat = map_multivariate(&theta, sigma, &op, &datum.d).unwrap();
            x_hat.iter().zip(&x).map(|(a, b)| a - b).collect()
        })
        .collect();
    for i in 0..3 {
        let mean = errors.iter().map(|e| e[i]).sum::<f64>() / draws as f64;
        let var = errors.iter().map(|e| (e[i] - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        let se_mean = (cov.get(i, i) / draws as f64).sqrt();
        assert!((mean - bias[i]).abs() <= 4.0 * se_mean + 1e-12, "bias {i}: {mean} vs {}", bias[i]);
        // Relative SE of a Gaussian sample variance is sqrt(2/n).
        let tol = 4.0 * cov.get(i, i) * (2.0 / draws as f64).sqrt() + 1e-15;
        assert!((var - cov.get(i, i)).abs() <= tol, "var {i}: {var} vs {}", cov.get(i, i));
    }
}

#[test]
fn mle_gradient_vanishes_in_expectation_at_the_truth() {
    let theta = Matrix::from_rows(&[&[2.0, -0.3], &[-0.3, 0.5]]).unwrap();
    let n = 200_000;
    let x = sample_gaussian_precision(&theta, n, &mut RngStream::new(6, 0)).unwrap();
    let x_tilde = sample_gaussian_precision(&theta, n, &mut RngStream::new(6, 1)).unwrap();
    let g = mle_grad_estimate(&x, &x_tilde).unwrap();
    let cov = theta.inverse_spd().unwrap();
    for i in 0..2 {
        for j in 0..2 {
            // Each half is an average of n products with variance ≤ Σ_ii Σ_jj + Σ_ij².
            let var = cov.get(i, i) * cov.get(j, j) + cov.get(i, j).powi(2);
            let se = 0.5 * (2.0 * var / n as f64).sqrt();
            assert!(g.get(i, j).abs() <= 4.0 * se, "entry ({i},{j}) = {}", g.get(i, j));
        }
    }
}

#[test]
fn map_and_posterior_variance_closed_forms() {
    let d = [2.0, -4.0];
    let x_hat = map_1d(3.0, 1.0, &d);
    assert_relative_eq!(x_hat[0], 1.5, max_relative = 1e-15);
    assert_relative_eq!(x_hat[1], -3.0, max_relative = 1e-15);
    assert_relative_eq!(posterior_var_1d(3.0, 1.0), 0.75, max_relative = 1e-15);
}

#[test]
fn oracle_estimator_fluctuates_at_the_clt_rate() {
    let (theta, n, seeds) = (2.0, 10_000, 400);
    let values: Vec<f64> = (0..seeds)
        .map(|s| {
            let case = Gaussian1DCase::sample(theta, 0.5, n, &mut RngStream::new(s, 9)).unwrap();
            theta_star_1d(&case.x).unwrap()
        })
        .collect();
    let mean = values.iter().sum::<f64>() / seeds as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (seeds - 1) as f64;
    // Var(θ*) = 2θ²/n; its sample estimate over 400 seeds has relative SE ≈ 0.07.
    let predicted = 2.0 * theta * theta / n as f64;
    assert!((var / predicted - 1.0).abs() < 0.3, "variance ratio {}", var / predicted);
    assert!((mean - theta).abs() < 4.0 * (predicted / seeds as f64).sqrt());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn estimators_scale_quadratically(seed in any::<u64>(), n in 2usize..200, c in 0.1f64..10.0) {
        let case = Gaussian1DCase::sample(1.3, 0.6, n, &mut RngStream::new(seed, 0)).unwrap();
        let scaled = |v: &[f64]| v.iter().map(|t| c * t).collect::<Vec<_>>();
        let (cx, cd) = (scaled(&case.x), scaled(&case.d));
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * (1.0 + b.abs());
        prop_assert!(close(theta_star_1d(&cx).unwrap(), c * c * theta_star_1d(&case.x).unwrap()));
        if let (Ok(a), Ok(b)) = (theta_hat_1d(&cx, &cd, c * 0.6), theta_hat_1d(&case.x, &case.d, 0.6)) {
            prop_assert!(close(a.value, c * c * b.value));
        }
        if let (Ok(a), Ok(b)) = (theta_tilde_1d(&cx, &cd, c * 0.6), theta_tilde_1d(&case.x, &case.d, 0.6)) {
            prop_assert!(close(a, c * c * b));
        }
    }

    #[test]
    fn clipped_estimator_is_nonnegative(seed in any::<u64>(), n in 2usize..100, sigma in 0.01f64..5.0) {
        let mut rng = RngStream::new(seed, 1);
        let case = Gaussian1DCase::sample(0.1, sigma, n, &mut rng).unwrap();
        prop_assert!(theta_tilde_1d(&case.x, &case.d, sigma).unwrap() >= 0.0);
        let hat = theta_hat_1d(&case.x, &case.d, sigma).unwrap();
        prop_assert_eq!(hat.negative, hat.value < 0.0);
    }
}
