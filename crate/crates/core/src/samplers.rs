//! Seeded random generation: normal variates, the planar Gaussian-mixture
//! generator, Langevin chains for Gaussian targets and their AR(1) oracle.

use std::f64::consts::PI;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm, Matrix, Vector};

/// A reproducible random stream identified by `(seed, stream)`.
///
/// Backed by the ChaCha8 counter-mode generator; the stream id selects an
/// independent keystream, so per-datum streams can be generated in any order.
/// Normal variates use the ziggurat sampler of `rand_distr`.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// A fresh stream derived from this stream's identity (not its state).
    pub fn fork(&self, id: u64) -> RngStream {
        RngStream::new(self.seed, splitmix64(self.stream ^ splitmix64(id.wrapping_add(1))))
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn normals(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.normal()).collect()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Equal-weight mixture of unit-covariance Gaussians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub means: Vec<Vector>,
}

impl MixtureSpec {
    pub fn new(means: Vec<Vector>) -> Result<Self> {
        let dim = means
            .first()
            .ok_or_else(|| Error::InvalidArgument("mixture needs at least one component".into()))?
            .len();
        if means.iter().any(|m| m.len() != dim) {
            return Err(Error::InvalidArgument("mixture means differ in dimension".into()));
        }
        Ok(Self { means })
    }

    /// `count` means evenly spaced on a circle of the given radius, starting at angle 0.
    pub fn circle(count: usize, radius: f64) -> Self {
        let means = (0..count)
            .map(|k| {
                let angle = 2.0 * PI * k as f64 / count as f64;
                Vector::from(vec![radius * angle.cos(), radius * angle.sin()])
            })
            .collect();
        Self { means }
    }

    /// Six components on a radius-8 circle at 60° spacing.
    pub fn six_on_circle() -> Self {
        Self::circle(6, 8.0)
    }

    pub fn count(&self) -> usize {
        self.means.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    /// Index of the mean closest to `x`.
    pub fn nearest(&self, x: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, m) in self.means.iter().enumerate() {
            let d: f64 = m.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }
}

/// Draws `n` points (columns) and the component each came from.
pub fn sample_mixture_labeled(
    spec: &MixtureSpec,
    n: usize,
    rng: &mut RngStream,
) -> Result<(Matrix, Vec<usize>)> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let dim = spec.dim();
    let mut out = Matrix::zeros(dim, n);
    let mut labels = Vec::with_capacity(n);
    for j in 0..n {
        let c = rng.below(spec.count());
        labels.push(c);
        for i in 0..dim {
            out.set(i, j, spec.means[c][i] + rng.normal());
        }
    }
    Ok((out, labels))
}

pub fn sample_mixture(spec: &MixtureSpec, n: usize, rng: &mut RngStream) -> Result<Matrix> {
    sample_mixture_labeled(spec, n, rng).map(|(x, _)| x)
}

/// `log p(x)` of the equal-weight unit-covariance mixture.
pub fn mixture_log_density(spec: &MixtureSpec, x: &[f64]) -> Result<f64> {
    if x.len() != spec.dim() {
        return Err(Error::DimensionMismatch {
            context: "mixture density",
            expected: spec.dim(),
            actual: x.len(),
        });
    }
    let exponents: Vec<f64> = spec
        .means
        .iter()
        .map(|m| {
            -0.5 * m
                .iter()
                .zip(x)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .collect();
    let max = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + exponents.iter().map(|e| (e - max).exp()).sum::<f64>().ln();
    Ok(lse - (spec.count() as f64).ln() - 0.5 * spec.dim() as f64 * (2.0 * PI).ln())
}

/// Draws `n` columns from `N(0, Θ⁻¹)` given the precision matrix `Θ`.
pub fn sample_gaussian_precision(theta: &Matrix, n: usize, rng: &mut RngStream) -> Result<Matrix> {
    let l = theta.cholesky()?;
    let p = theta.rows();
    let mut out = Matrix::zeros(p, n);
    for j in 0..n {
        // Solve Lᵀ x = z, so Cov(x) = (L Lᵀ)⁻¹.
        let mut x = rng.normals(p);
        for i in (0..p).rev() {
            let mut s = x[i];
            for k in i + 1..p {
                s -= l.get(k, i) * x[k];
            }
            x[i] = s / l.get(i, i);
        }
        for (i, v) in x.into_iter().enumerate() {
            out.set(i, j, v);
        }
    }
    Ok(out)
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power iteration.
pub fn largest_eigenvalue(m: &Matrix) -> f64 {
    let n = m.rows();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * i as f64).collect();
    let mut lambda = 0.0;
    for _ in 0..1000 {
        let nv = norm(&v);
        if nv == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        let w = m.matvec_unchecked(&v);
        let next = dot(&v, &w);
        v = w;
        if (next - lambda).abs() <= 1e-13 * next.abs().max(1.0) {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda
}

fn check_langevin_stability(theta: &Matrix, delta: f64) -> Result<()> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    if theta.rows() != theta.cols() {
        return Err(Error::DimensionMismatch {
            context: "precision matrix",
            expected: theta.rows(),
            actual: theta.cols(),
        });
    }
    let lambda_max = largest_eigenvalue(theta);
    let factor = 0.5 * delta * delta * lambda_max;
    if factor >= 2.0 {
        return Err(Error::Unstable { lambda_max, factor });
    }
    Ok(())
}

/// One Langevin step `x − (δ²/2) Θ x + δ ε` for a single state.
pub fn langevin_step(theta: &Matrix, delta: f64, x: &[f64], noise: &[f64]) -> Vec<f64> {
    let tx = theta.matvec_unchecked(x);
    let mut out = x.to_vec();
    axpy(-0.5 * delta * delta, &tx, &mut out);
    axpy(delta, noise, &mut out);
    out
}

/// Langevin run with optional snapshots.
#[derive(Debug, Clone)]
pub struct LangevinRun {
    pub samples: Matrix,
    pub snapshots: Vec<(usize, Matrix)>,
}

/// Runs `init.cols()` independent chains for `n_iters` steps targeting `N(0, Θ⁻¹)`.
///
/// Chain `c` draws its noise from `rng.fork(c)`, so results do not depend on
/// how chains are scheduled.
pub fn langevin_run(
    theta: &Matrix,
    delta: f64,
    n_iters: usize,
    rng: &RngStream,
    init: &Matrix,
) -> Result<Matrix> {
    langevin_run_snapshots(theta, delta, n_iters, rng, init, &[]).map(|r| r.samples)
}

/// Like [`langevin_run`], recording the chain states after each iteration count in `snapshots`.
pub fn langevin_run_snapshots(
    theta: &Matrix,
    delta: f64,
    n_iters: usize,
    rng: &RngStream,
    init: &Matrix,
    snapshots: &[usize],
) -> Result<LangevinRun> {
    let mut shots: Vec<(usize, Matrix)> = Vec::new();
    let samples = langevin_observe(theta, delta, n_iters, rng, init, |k, state| {
        if snapshots.contains(&k) {
            shots.push((k, state.clone()));
        }
    })?;
    Ok(LangevinRun {
        samples,
        snapshots: shots,
    })
}

/// Core Langevin loop; `observer(k, state)` sees the state after k iterations, k = 0..=n_iters.
pub fn langevin_observe<F>(
    theta: &Matrix,
    delta: f64,
    n_iters: usize,
    rng: &RngStream,
    init: &Matrix,
    mut observer: F,
) -> Result<Matrix>
where
    F: FnMut(usize, &Matrix),
{
    check_langevin_stability(theta, delta)?;
    let p = theta.rows();
    if init.rows() != p {
        return Err(Error::DimensionMismatch {
            context: "langevin init",
            expected: p,
            actual: init.rows(),
        });
    }
    let chains = init.cols();
    let mut streams: Vec<RngStream> = (0..chains).map(|c| rng.fork(c as u64)).collect();
    let mut state = init.clone();
    observer(0, &state);
    let mut x = vec![0.0; p];
    for k in 1..=n_iters {
        for (c, stream) in streams.iter_mut().enumerate() {
            for (i, xi) in x.iter_mut().enumerate() {
                *xi = state.get(i, c);
            }
            let noise = stream.normals(p);
            let next = langevin_step(theta, delta, &x, &noise);
            for (i, v) in next.into_iter().enumerate() {
                state.set(i, c, v);
            }
        }
        observer(k, &state);
    }
    Ok(state)
}

/// Stationary covariance of the Langevin AR(1) recursion: solves
/// `Σ = A Σ Aᵀ + δ² I` with `A = I − (δ²/2) Θ` by the doubling series.
pub fn ar1_stationary_cov(theta: &Matrix, delta: f64) -> Result<Matrix> {
    check_langevin_stability(theta, delta)?;
    let p = theta.rows();
    let mut a = Matrix::identity(p);
    for (dst, t) in a.as_mut_slice().iter_mut().zip(theta.as_slice()) {
        *dst -= 0.5 * delta * delta * t;
    }
    let mut sigma = Matrix::diag(&vec![delta * delta; p]);
    for _ in 0..200 {
        // Σ_{2n} = Σ_n + A^n Σ_n (A^n)ᵀ ; A^{2n} = A^n A^n
        let increment = a.matmul(&sigma)?.matmul(&a.transpose())?;
        let scale = sigma.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let change = increment.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (s, inc) in sigma.as_mut_slice().iter_mut().zip(increment.as_slice()) {
            *s += inc;
        }
        if change <= 1e-12 * scale {
            return Ok(sigma);
        }
        a = a.matmul(&a)?;
    }
    Err(Error::InvalidArgument(
        "stationary covariance series did not converge".into(),
    ))
}

/// Smallest eigenvalue of a symmetric positive definite matrix and its unit
/// eigenvector, by power iteration on `λ_max I − Θ`. This is the slowest
/// mixing direction of the Langevin chain.
pub fn slow_direction(theta: &Matrix) -> Result<(f64, Vector)> {
    theta.cholesky()?;
    let n = theta.rows();
    let shift = largest_eigenvalue(theta);
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.37 * i as f64).collect();
    let mut prev = f64::NAN;
    for _ in 0..10_000 {
        let nv = norm(&v);
        v.iter_mut().for_each(|x| *x /= nv);
        let tv = theta.matvec_unchecked(&v);
        let rayleigh = dot(&v, &tv);
        let next: Vec<f64> = v.iter().zip(&tv).map(|(a, b)| shift * a - b).collect();
        // A vanishing iterate means Θ is a multiple of the identity: any direction is slowest.
        if (rayleigh - prev).abs() <= 1e-15 * shift || norm(&next) <= 1e-14 * shift {
            break;
        }
        prev = rayleigh;
        v = next;
    }
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let lambda = dot(&v, &theta.matvec_unchecked(&v));
    Ok((lambda, v.into()))
}

/// Seed-averaged time-series variance along the slow direction.
///
/// Runs `chains` chains from the origin. At each checkpoint `k` every chain
/// contributes the sample variance of its projected iterates `1..=k`; the
/// result is the mean over chains divided by the target variance `1/λ_min`.
pub fn slow_variance_ratios(
    theta: &Matrix,
    delta: f64,
    checkpoints: &[usize],
    chains: usize,
    rng: &RngStream,
) -> Result<Vec<f64>> {
    if chains == 0 || checkpoints.iter().any(|&k| k < 2) {
        return Err(Error::InvalidArgument(
            "need at least one chain and checkpoints of two or more iterations".into(),
        ));
    }
    let (lambda, v) = slow_direction(theta)?;
    let truth = 1.0 / lambda;
    let last = checkpoints.iter().copied().max().unwrap_or(0);
    let mut sum = vec![0.0; chains];
    let mut sum_sq = vec![0.0; chains];
    let mut ratios = vec![f64::NAN; checkpoints.len()];
    let init = Matrix::zeros(theta.rows(), chains);
    langevin_observe(theta, delta, last, rng, &init, |k, state| {
        if k == 0 {
            return;
        }
        for c in 0..chains {
            let proj: f64 = (0..v.len()).map(|i| v[i] * state.get(i, c)).sum();
            sum[c] += proj;
            sum_sq[c] += proj * proj;
        }
        for (slot, _) in checkpoints.iter().enumerate().filter(|(_, &cp)| cp == k) {
            let n = k as f64;
            let mean_var = (0..chains)
                .map(|c| (sum_sq[c] - sum[c] * sum[c] / n) / (n - 1.0))
                .sum::<f64>()
                / chains as f64;
            ratios[slot] = mean_var / truth;
        }
    })?;
    Ok(ratios)
}
