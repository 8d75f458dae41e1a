//! Closed-form Gaussian reference estimators.
//!
//! In the scalar case the prior is `x ~ N(0, θ)` with `θ` the variance and
//! `d = x + σε`. In the multivariate case `Θ` enters the MAP system as
//! `(PᵀP + σ²Θ⁻¹)⁻¹`.

use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, Matrix, Vector};
use crate::operators::ForwardOperator;
use crate::samplers::RngStream;

/// Tolerance below which a closed-form denominator counts as zero.
pub const DEGENERATE_TOL: f64 = 1e-12;

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Scalar-variance problem with `n` samples and their latent values.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian1DCase {
    pub theta: f64,
    pub sigma: f64,
    pub x: Vector,
    pub d: Vector,
}

impl Gaussian1DCase {
    pub fn new(theta: f64, sigma: f64, x: Vector, d: Vector) -> Result<Self> {
        check_positive("theta", theta)?;
        check_positive("sigma", sigma)?;
        if x.is_empty() {
            return Err(Error::InvalidArgument("need at least one sample".into()));
        }
        check_len("latent values", x.len(), d.len())?;
        Ok(Self { theta, sigma, x, d })
    }

    /// Draws `x ~ N(0, θ)` and `d = x + σε`.
    pub fn sample(theta: f64, sigma: f64, n: usize, rng: &mut RngStream) -> Result<Self> {
        check_positive("theta", theta)?;
        let sd = theta.sqrt();
        let x: Vec<f64> = (0..n).map(|_| sd * rng.normal()).collect();
        let d: Vec<f64> = x.iter().map(|v| v + sigma * rng.normal()).collect();
        Self::new(theta, sigma, x.into(), d.into())
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }
}

/// Moment / maximum-likelihood estimate `‖x‖² / n`.
pub fn theta_star_1d(x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::InvalidArgument("theta_star_1d needs at least one sample".into()));
    }
    Ok(dot(x, x) / x.len() as f64)
}

/// Maximum-likelihood variance of `N(0, θ)` computed from the log-likelihood
/// stationarity condition. Shares no code with [`theta_star_1d`].
pub fn mle_variance_1d(x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::InvalidArgument("mle_variance_1d needs at least one sample".into()));
    }
    let mut sum = 0.0;
    for v in x {
        sum += v * v;
    }
    Ok(sum / x.len() as f64)
}

/// Result of [`theta_hat_1d`]. `negative` marks a violated `θ > 0` constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaHat {
    pub value: f64,
    pub negative: bool,
}

/// Maximum-recovery estimate `σ² dᵀx / (‖d‖² − dᵀx)`.
pub fn theta_hat_1d(x: &[f64], d: &[f64], sigma: f64) -> Result<ThetaHat> {
    check_len("latent values", x.len(), d.len())?;
    check_positive("sigma", sigma)?;
    let dx = dot(d, x);
    let denom = dot(d, d) - dx;
    if denom.abs() <= DEGENERATE_TOL {
        return Err(Error::DegenerateSample(format!(
            "‖d‖² − dᵀx = {denom:e} is within {DEGENERATE_TOL:e} of zero"
        )));
    }
    let value = sigma * sigma * dx / denom;
    Ok(ThetaHat {
        value,
        negative: value < 0.0,
    })
}

/// Conditional-likelihood comparison estimate.
pub fn theta_tilde_1d(x: &[f64], d: &[f64], sigma: f64) -> Result<f64> {
    check_len("latent values", x.len(), d.len())?;
    check_positive("sigma", sigma)?;
    let n = x.len() as f64;
    let s2 = sigma * sigma;
    let xx = dot(x, x);
    let dd = dot(d, d);
    let denom = 2.0 * (n * s2 + dd - xx);
    if denom.abs() <= DEGENERATE_TOL {
        return Err(Error::DegenerateSample(format!("denominator {denom:e} is zero")));
    }
    let root = (n * n * s2 * s2 + 4.0 * xx * dd).sqrt();
    Ok((2.0 * s2 * xx - n * s2 * s2 + s2 * root) / denom)
}

/// Posterior mean `θ/(σ²+θ) d`.
pub fn map_1d(theta: f64, sigma: f64, d: &[f64]) -> Vector {
    let w = theta / (sigma * sigma + theta);
    d.iter().map(|v| w * v).collect::<Vec<_>>().into()
}

/// Posterior variance `σ²θ/(σ²+θ)`.
pub fn posterior_var_1d(theta: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    s2 * theta / (s2 + theta)
}

/// Frequentist MSE of [`map_1d`] given the true `x`.
pub fn mse_map_1d(theta: f64, sigma: f64, x: &[f64]) -> f64 {
    let s2 = sigma * sigma;
    let denom = (s2 + theta) * (s2 + theta);
    (s2 * s2 * dot(x, x) + x.len() as f64 * s2 * theta * theta) / denom
}

/// Symmetric positive definite `Θ` with its noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionCase {
    pub theta: Matrix,
    pub sigma: f64,
}

impl PrecisionCase {
    pub fn new(theta: Matrix, sigma: f64) -> Result<Self> {
        check_spd(&theta)?;
        check_positive("sigma", sigma)?;
        Ok(Self { theta, sigma })
    }
}

fn check_spd(theta: &Matrix) -> Result<()> {
    if theta.rows() != theta.cols() {
        return Err(Error::InvalidArgument("Θ must be square".into()));
    }
    if !theta.is_symmetric(1e-12) {
        return Err(Error::InvalidArgument("Θ must be symmetric".into()));
    }
    theta.cholesky().map(|_| ())
}

/// Dense `PᵀP`.
fn gram_matrix(op: &ForwardOperator) -> Result<Matrix> {
    let p = op.input_dim();
    let mut g = Matrix::zeros(p, p);
    let mut e = vec![0.0; p];
    for j in 0..p {
        e[j] = 1.0;
        let col = op.apply_adjoint(&op.apply(&e)?)?;
        for i in 0..p {
            g.set(i, j, col[i]);
        }
        e[j] = 0.0;
    }
    Ok(g)
}

/// `(PᵀP + σ²Θ⁻¹, Θ⁻¹)`.
fn map_system(theta: &Matrix, sigma: f64, op: &ForwardOperator) -> Result<(Matrix, Matrix)> {
    check_spd(theta)?;
    check_positive("sigma", sigma)?;
    check_len("operator input dimension", theta.rows(), op.input_dim())?;
    let theta_inv = theta.inverse_spd()?;
    let mut a = gram_matrix(op)?;
    for (v, t) in a.as_mut_slice().iter_mut().zip(theta_inv.as_slice()) {
        *v += sigma * sigma * t;
    }
    Ok((a, theta_inv))
}

/// MAP estimate `(PᵀP + σ²Θ⁻¹)⁻¹ Pᵀd` via a dense Cholesky solve.
pub fn map_multivariate(theta: &Matrix, sigma: f64, op: &ForwardOperator, d: &[f64]) -> Result<Vector> {
    let (a, _) = map_system(theta, sigma, op)?;
    let rhs = op.apply_adjoint(d)?;
    Ok(a.solve_spd(&rhs)?.into())
}

/// Conditional bias `−σ² H Θ⁻¹ x` and covariance `σ² H PᵀP H` of the MAP
/// estimate, with `H = (PᵀP + σ²Θ⁻¹)⁻¹`.
pub fn bias_var_multivariate(
    theta: &Matrix,
    sigma: f64,
    op: &ForwardOperator,
    x: &[f64],
) -> Result<(Vector, Matrix)> {
    check_len("signal", theta.rows(), x.len())?;
    let (a, theta_inv) = map_system(theta, sigma, op)?;
    let h = a.inverse_spd()?;
    let s2 = sigma * sigma;
    let bias: Vec<f64> = h.matvec(&theta_inv.matvec(x)?)?.iter().map(|v| -s2 * v).collect();
    let mut cov = h.matmul(&gram_matrix(op)?)?.matmul(&h)?;
    cov.as_mut_slice().iter_mut().for_each(|v| *v *= s2);
    Ok((bias.into(), cov))
}

/// Score-based gradient estimate `(1/2n) XXᵀ − (1/2N) X̃X̃ᵀ` (samples as columns).
pub fn mle_grad_estimate(x: &Matrix, x_tilde: &Matrix) -> Result<Matrix> {
    if x.cols() == 0 || x_tilde.cols() == 0 || x.rows() == 0 {
        return Err(Error::InvalidArgument("mle_grad_estimate needs nonempty samples".into()));
    }
    check_len("model sample rows", x.rows(), x_tilde.rows())?;
    let p = x.rows();
    let mut g = Matrix::zeros(p, p);
    let second_moment = |m: &Matrix, scale: f64, g: &mut Matrix| {
        for k in 0..m.cols() {
            let col = m.column(k);
            g.add_outer(scale, &col, &col);
        }
    };
    second_moment(x, 0.5 / x.cols() as f64, &mut g);
    second_moment(x_tilde, -0.5 / x_tilde.cols() as f64, &mut g);
    Ok(g)
}

/// Both sides of `E ∂_θ φ = −∂_θ log Z` for `φ(x, θ) = x²/(2θ)`, plus a
/// Monte-Carlo estimate of the left side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreIdentity {
    pub lhs: f64,
    pub rhs: f64,
    pub mc_lhs: f64,
    pub mc_std_error: f64,
}

pub fn score_identity_check(theta: f64, draws: usize, rng: &mut RngStream) -> Result<ScoreIdentity> {
    check_positive("theta", theta)?;
    if draws < 2 {
        return Err(Error::InvalidArgument("need at least two Monte-Carlo draws".into()));
    }
    // E[−x²/(2θ²)] with E x² = θ.
    let lhs = -theta / (2.0 * theta * theta);
    // −∂_θ ½ log(2πθ).
    let rhs = -0.5 / theta;
    let sd = theta.sqrt();
    let values: Vec<f64> = (0..draws)
        .map(|_| {
            let x = sd * rng.normal();
            -x * x / (2.0 * theta * theta)
        })
        .collect();
    let n = draws as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok(ScoreIdentity {
        lhs,
        rhs,
        mc_lhs: mean,
        mc_std_error: (var / n).sqrt(),
    })
}

/// One cell of the consistency study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyRow {
    pub n: usize,
    pub seed: u64,
    pub theta_star: f64,
    pub theta_hat: f64,
    pub theta_hat_negative: bool,
    pub theta_tilde: f64,
}

/// Evaluates all three scalar estimators for every `(seed, n)` pair. Each
/// pair draws from its own stream, so rows do not depend on the grid.
pub fn consistency_study(
    theta: f64,
    sigma: f64,
    ns: &[usize],
    seeds: usize,
    base_seed: u64,
) -> Result<Vec<ConsistencyRow>> {
    check_positive("theta", theta)?;
    check_positive("sigma", sigma)?;
    if ns.iter().any(|&n| n == 0) {
        return Err(Error::InvalidArgument("sample sizes must be at least 1".into()));
    }
    let cells: Vec<(usize, u64)> = ns
        .iter()
        .flat_map(|&n| (0..seeds as u64).map(move |s| (n, s)))
        .collect();
    cells
        .par_iter()
        .map(|&(n, seed)| {
            let mut rng = RngStream::new(base_seed, seed).fork(n as u64);
            let case = Gaussian1DCase::sample(theta, sigma, n, &mut rng)?;
            let hat = theta_hat_1d(&case.x, &case.d, sigma)?;
            Ok(ConsistencyRow {
                n,
                seed,
                theta_star: theta_star_1d(&case.x)?,
                theta_hat: hat.value,
                theta_hat_negative: hat.negative,
                theta_tilde: theta_tilde_1d(&case.x, &case.d, sigma)?,
            })
        })
        .collect()
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    check_len("slope ordinates", x.len(), y.len())?;
    if x.len() < 2 || x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidArgument("slope needs two or more positive points".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    Ok(sxy / sxx)
}

/// Per-`n` mean absolute errors of `θ̂` and `θ̃`, and their log-log slopes.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencySummary {
    pub ns: Vec<usize>,
    pub hat_error: Vec<f64>,
    pub tilde_error: Vec<f64>,
    pub hat_slope: f64,
    pub tilde_slope: f64,
}

pub fn summarize_consistency(theta: f64, rows: &[ConsistencyRow]) -> Result<ConsistencySummary> {
    let mut ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
    ns.sort_unstable();
    ns.dedup();
    let mean_err = |n: usize, pick: fn(&ConsistencyRow) -> f64| {
        let errs: Vec<f64> = rows.iter().filter(|r| r.n == n).map(|r| (pick(r) - theta).abs()).collect();
        errs.iter().sum::<f64>() / errs.len() as f64
    };
    let hat_error: Vec<f64> = ns.iter().map(|&n| mean_err(n, |r| r.theta_hat)).collect();
    let tilde_error: Vec<f64> = ns.iter().map(|&n| mean_err(n, |r| r.theta_tilde)).collect();
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    Ok(ConsistencySummary {
        hat_slope: log_log_slope(&xs, &hat_error)?,
        tilde_slope: log_log_slope(&xs, &tilde_error)?,
        ns,
        hat_error,
        tilde_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn theta_star_examples() {
        assert_abs_diff_eq!(theta_star_1d(&[1.0, 2.0, 3.0]).unwrap(), 14.0 / 3.0, epsilon = 1e-15);
        assert_eq!(theta_star_1d(&[0.0; 4]).unwrap(), 0.0);
        assert!(theta_star_1d(&[]).is_err());
    }

    #[test]
    fn theta_hat_examples() {
        let h = theta_hat_1d(&[1.0, 2.0], &[2.0, 2.0], 1.0).unwrap();
        assert_abs_diff_eq!(h.value, 3.0, epsilon = 1e-15);
        assert!(!h.negative);
        let x = [0.3, -1.2, 2.5];
        for c in [1.5, 2.0, 4.0] {
            let d: Vec<f64> = x.iter().map(|v| c * v).collect();
            let h = theta_hat_1d(&x, &d, 0.7).unwrap();
            assert_abs_diff_eq!(h.value, 0.49 / (c - 1.0), epsilon = 1e-12);
        }
        assert!(matches!(theta_hat_1d(&x, &x, 1.0), Err(Error::DegenerateSample(_))));
        let neg = theta_hat_1d(&[1.0], &[0.5], 1.0).unwrap();
        assert!(neg.negative && neg.value < 0.0);
    }

    #[test]
    fn theta_tilde_examples() {
        let t = theta_tilde_1d(&[1.0, 2.0], &[2.0, 2.0], 1.0).unwrap();
        assert_abs_diff_eq!(t, (8.0 + 164f64.sqrt()) / 10.0, epsilon = 1e-14);
        assert_abs_diff_eq!(t, 2.080625, epsilon = 1e-6);
    }

    #[test]
    fn map_and_posterior_examples() {
        assert_eq!(map_1d(0.25, 0.5, &[3.0]).as_slice(), &[1.5]);
        assert_eq!(posterior_var_1d(0.25, 0.5), 0.125);
        let flat = map_1d(1e12, 1.0, &[3.0, -7.0]);
        assert_abs_diff_eq!(flat[0], 3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(flat[1], -7.0, epsilon = 1e-10);
        assert_eq!(map_1d(1.0, 1.0, &[4.0]).as_slice(), &[2.0]);
        assert_eq!(posterior_var_1d(1.0, 1.0), 0.5);
    }

    #[test]
    fn mse_examples() {
        assert_abs_diff_eq!(mse_map_1d(1.0, 1.0, &[1.0, 2.0]), 1.75, epsilon = 1e-15);
        assert_abs_diff_eq!(mse_map_1d(1e-14, 1.0, &[1.0, 2.0]), 5.0, epsilon = 1e-12);
        let x = [0.4, -1.1, 2.0, 0.9];
        let best = theta_star_1d(&x).unwrap();
        let grid: Vec<f64> = (1..=400).map(|i| i as f64 * 0.01).collect();
        let argmin = grid
            .iter()
            .copied()
            .min_by(|a, b| mse_map_1d(*a, 0.8, &x).total_cmp(&mse_map_1d(*b, 0.8, &x)))
            .unwrap();
        assert!((argmin - best).abs() <= 0.01);
    }

    #[test]
    fn map_multivariate_examples() {
        let d = [2.0, -4.0];
        let x = map_multivariate(&Matrix::identity(2), 1.0, &ForwardOperator::identity(2), &d).unwrap();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(x[1], -2.0, epsilon = 1e-15);
        let theta = Matrix::diag(&[0.25, 1.0]);
        let x = map_multivariate(&theta, 1.0, &ForwardOperator::identity(2), &d).unwrap();
        assert_abs_diff_eq!(x[0], 2.0 / 5.0, epsilon = 1e-15);
        assert_abs_diff_eq!(x[1], -2.0, epsilon = 1e-15);
        let mask = ForwardOperator::mask(2, vec![0]).unwrap();
        let x = map_multivariate(&Matrix::diag(&[2.0, 3.0]), 0.5, &mask, &[1.0]).unwrap();
        assert_eq!(x[1], 0.0);
        assert!(map_multivariate(&Matrix::diag(&[1.0, -1.0]), 1.0, &ForwardOperator::identity(2), &d).is_err());
    }

    #[test]
    fn bias_var_examples() {
        let (b, c) = bias_var_multivariate(&Matrix::identity(2), 1.0, &ForwardOperator::identity(2), &[2.0, -6.0])
            .unwrap();
        assert_abs_diff_eq!(b[0], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b[1], 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.get(0, 0), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(c.get(0, 1), 0.0, epsilon = 1e-15);
        let (b, c) = bias_var_multivariate(&Matrix::identity(2), 1e-9, &ForwardOperator::identity(2), &[2.0, -6.0])
            .unwrap();
        assert!(b.norm() < 1e-15 && c.as_slice().iter().all(|v| v.abs() < 1e-17));
    }

    #[test]
    fn mle_grad_examples() {
        let x = Matrix::from_rows(&[&[1.0, 2.0], &[0.5, -1.0]]).unwrap();
        let g = mle_grad_estimate(&x, &x).unwrap();
        assert!(g.as_slice().iter().all(|v| v.abs() < 1e-15));
        let g = mle_grad_estimate(&Matrix::new(1, 1, vec![2.0]).unwrap(), &Matrix::zeros(1, 2)).unwrap();
        assert_eq!(g.as_slice(), &[2.0]);
        assert!(mle_grad_estimate(&Matrix::zeros(1, 0), &Matrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn score_identity_examples() {
        let mut rng = RngStream::new(3, 0);
        let s = score_identity_check(2.0, 10, &mut rng).unwrap();
        assert_eq!((s.lhs, s.rhs), (-0.25, -0.25));
        let s = score_identity_check(0.5, 10, &mut rng).unwrap();
        assert_eq!((s.lhs, s.rhs), (-1.0, -1.0));
    }

    #[test]
    fn theta_star_matches_mle_path() {
        let x = [0.3, -2.0, 1.25, 4.5, -0.01];
        assert_eq!(theta_star_1d(&x).unwrap(), mle_variance_1d(&x).unwrap());
    }

    #[test]
    fn slope_of_power_law() {
        let x = [1.0, 10.0, 100.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-0.5)).collect();
        assert_abs_diff_eq!(log_log_slope(&x, &y).unwrap(), -0.5, epsilon = 1e-12);
    }
}
