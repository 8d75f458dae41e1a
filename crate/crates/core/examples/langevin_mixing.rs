//! Langevin sampling of an ill-conditioned Gaussian: variance along the slow
//! eigendirection as the chains run, and the stationary covariance of the
//! discretized dynamics.

use mrmap::samplers::{ar1_stationary_cov, langevin_run, slow_direction, slow_variance_ratios};
use mrmap::experiments::langevin::sample_covariance;
use mrmap::{Matrix, Result, RngStream};

fn main() -> Result<()> {
    let theta = Matrix::from_rows(&[&[1000.0, -1.0], &[-1.0, 2.0]])?;
    let delta = 0.044;

    let (lambda, v) = slow_direction(&theta)?;
    println!("slow eigenvalue {lambda:.5}, direction ({:.5}, {:.5})", v[0], v[1]);

    let checkpoints = [1_000, 2_000, 4_000, 8_000, 16_000];
    let ratios = slow_variance_ratios(&theta, delta, &checkpoints, 20, &RngStream::new(0, 3))?;
    for (k, r) in checkpoints.iter().zip(&ratios) {
        println!("after {k:>6} iterations: slow variance / target = {r:.3}");
    }

    let chains = 400;
    let samples = langevin_run(&theta, delta, 20_000, &RngStream::new(0, 2), &Matrix::zeros(2, chains))?;
    let empirical = sample_covariance(&samples);
    let stationary = ar1_stationary_cov(&theta, delta)?;
    println!("\n{:>12} {:>14} {:>14}", "entry", "chains", "stationary");
    for (i, name) in ["(0,0)", "(0,1)", "(1,1)"].iter().enumerate() {
        let idx = [0, 1, 3][i];
        println!("{name:>12} {:>14.5} {:>14.5}", empirical[idx], stationary.as_slice()[idx]);
    }
    Ok(())
}
