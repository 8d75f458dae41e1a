//! MAP recovery under a Gaussian prior with a masking operator, and the
//! predicted bias and covariance compared with a Monte-Carlo replay.

use mrmap::gaussian::{bias_var_multivariate, map_multivariate};
use mrmap::operators::make_latent;
use mrmap::{ForwardOperator, Matrix, Result, RngStream};

fn main() -> Result<()> {
    let theta = Matrix::from_rows(&[&[2.0, 0.5, 0.0], &[0.5, 1.0, 0.2], &[0.0, 0.2, 1.5]])?;
    let sigma = 0.3;
    let op = ForwardOperator::mask(3, vec![0, 2])?;
    let x = [1.0, -0.5, 0.8];

    let (bias, cov) = bias_var_multivariate(&theta, sigma, &op, &x)?;
    let draws = 20_000;
    let mut rng = RngStream::new(3, 0);
    let mut mean = [0.0; 3];
    let mut second = [0.0; 9];
    for _ in 0..draws {
        let datum = make_latent(&x, op.clone(), sigma, &mut rng)?;
        let x_hat = map_multivariate(&theta, sigma, &op, &datum.d)?;
        let e: Vec<f64> = x_hat.iter().zip(&x).map(|(a, b)| a - b).collect();
        for i in 0..3 {
            mean[i] += e[i] / draws as f64;
            for j in 0..3 {
                second[i * 3 + j] += e[i] * e[j] / draws as f64;
            }
        }
    }
    println!("{:>4} {:>12} {:>12} {:>12} {:>12}", "i", "bias", "mc bias", "var", "mc var");
    for i in 0..3 {
        let mc_var = second[i * 4] - mean[i] * mean[i];
        println!("{i:>4} {:>12.5} {:>12.5} {:>12.5} {:>12.5}", bias[i], mean[i], cov.get(i, i), mc_var);
    }
    Ok(())
}
