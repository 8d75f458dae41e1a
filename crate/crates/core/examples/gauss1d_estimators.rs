//! Scalar variance estimators on the 1D Gaussian: the oracle `θ*`, the
//! unbiased `θ̂` and the clipped `θ̃`, their error decay in `n`, and the
//! closed-form MAP shrinkage.

use mrmap::gaussian::{
    consistency_study, map_1d, mse_map_1d, posterior_var_1d, summarize_consistency, Gaussian1DCase,
    theta_hat_1d, theta_star_1d, theta_tilde_1d,
};
use mrmap::{Result, RngStream};

fn main() -> Result<()> {
    let (theta, sigma) = (2.0, 0.5);

    let mut rng = RngStream::new(7, 0);
    let case = Gaussian1DCase::sample(theta, sigma, 10_000, &mut rng)?;
    let hat = theta_hat_1d(&case.x, &case.d, sigma)?;
    println!("one draw, n = {}", case.n());
    println!("  theta*      = {:.4}", theta_star_1d(&case.x)?);
    println!("  theta_hat   = {:.4} (negative: {})", hat.value, hat.negative);
    println!("  theta_tilde = {:.4}", theta_tilde_1d(&case.x, &case.d, sigma)?);

    let x_hat = map_1d(theta, sigma, &case.d);
    println!(
        "  MAP shrinks d by {:.4}; posterior variance {:.4}; MSE {:.2}",
        x_hat[0] / case.d[0],
        posterior_var_1d(theta, sigma),
        mse_map_1d(theta, sigma, &case.x)
    );

    let ns = [100, 1_000, 10_000, 100_000];
    let rows = consistency_study(theta, sigma, &ns, 50, 0)?;
    let summary = summarize_consistency(theta, &rows)?;
    println!("\n{:>8} {:>14} {:>14}", "n", "|hat - 2|", "|tilde - 2|");
    for ((n, h), t) in summary.ns.iter().zip(&summary.hat_error).zip(&summary.tilde_error) {
        println!("{n:>8} {h:>14.5} {t:>14.5}");
    }
    println!("log-log slopes: hat {:.3}, tilde {:.3}", summary.hat_slope, summary.tilde_slope);
    Ok(())
}
