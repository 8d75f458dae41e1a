//! Training loop: loss assembly, Adam with step schedule and weight decay,
//! nonnegativity projection of the layer weights, and Monte-Carlo MSE.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::flow::run_flow;
use crate::grad::{loss_terms_and_grad, ParamGradient};
use crate::linalg::{Matrix, Vector};
use crate::operators::{make_latent, sample_mask, ForwardOperator, LatentDatum};
use crate::potential::{FlowTrajectory, Hyper, PotentialParams};
use crate::samplers::RngStream;

/// Per-sample quadratic loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Losses {
    /// Recovery error `‖K u_ℓ − x‖²`.
    pub re: f64,
    /// Predictive error `‖P K u_ℓ − P x‖²`.
    pub rp: f64,
    /// Consistency error `‖q − u_ℓ‖²`.
    pub rc: f64,
}

impl Losses {
    pub fn total(&self, alpha: f64, gamma: f64) -> f64 {
        total_loss(self.re, self.rp, self.rc, alpha, gamma)
    }
}

pub fn total_loss(re: f64, rp: f64, rc: f64, alpha: f64, gamma: f64) -> f64 {
    re + alpha * rp + gamma * rc
}

/// The three loss terms of one sample. Batch averaging happens in [`fit`].
pub fn compute_losses(
    params: &PotentialParams,
    traj: &FlowTrajectory,
    datum: &LatentDatum,
    x_true: &[f64],
) -> Result<Losses> {
    check_len("target", params.p(), x_true.len())?;
    check_len("operator input dimension", params.p(), datum.operator.input_dim())?;
    let u_ell = traj.terminal();
    check_len("terminal block", params.q(), u_ell.len())?;
    check_len("terminal solve", params.q(), traj.q_vec.len())?;
    let x_hat = params.k.matvec_unchecked(u_ell);
    let err: Vec<f64> = x_hat.iter().zip(x_true).map(|(a, b)| a - b).collect();
    let re = err.iter().map(|e| e * e).sum();
    let rp = datum
        .operator
        .apply_unchecked(&err)
        .iter()
        .map(|e| e * e)
        .sum();
    let rc = traj
        .q_vec
        .iter()
        .zip(u_ell.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(Losses { re, rp, rc })
}

/// Architecture and solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub q: usize,
    pub ell: usize,
    pub beta: f64,
    pub h: f64,
    pub cg_iters: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            q: 128,
            ell: 5,
            beta: 1.0,
            h: 1.0,
            cg_iters: 8,
        }
    }
}

/// Optimizer settings and schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub lr_decay_factor: f64,
    pub lr_decay_every: usize,
    pub weight_decay: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub sigma: f64,
    pub mask_fraction: f64,
    pub seed: u64,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 120,
            batch_size: 64,
            lr: 1e-3,
            lr_decay_factor: 0.5,
            lr_decay_every: 20,
            weight_decay: 1e-5,
            alpha: 1.0,
            gamma: 1.0,
            sigma: 1.0,
            mask_fraction: 0.3,
            seed: 0,
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.lr >= 0.0) {
            return bad("lr must be nonnegative");
        }
        if !(self.lr_decay_factor > 0.0) || self.lr_decay_every == 0 {
            return bad("lr schedule needs a positive factor and period");
        }
        if !(self.weight_decay >= 0.0 && self.alpha >= 0.0 && self.gamma >= 0.0) {
            return bad("weight_decay, alpha and gamma must be nonnegative");
        }
        if !(self.sigma > 0.0) {
            return bad("sigma must be positive");
        }
        if !(self.mask_fraction > 0.0 && self.mask_fraction <= 1.0) {
            return bad("mask_fraction must lie in (0, 1]");
        }
        let m = &self.model;
        if m.ell == 0 || m.q == 0 || !(m.beta > 0.0) || !(m.h > 0.0) {
            return bad("model needs ell, q >= 1 and positive beta, h");
        }
        Ok(())
    }

    pub fn hyper(&self) -> Hyper {
        Hyper {
            beta: self.model.beta,
            h: self.model.h,
            sigma: self.sigma,
            cg_iters: self.model.cg_iters,
        }
    }

    /// `lr₀ · factor^⌊epoch / every⌋`, epochs counted from 0.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr * self.lr_decay_factor.powi((epoch / self.lr_decay_every) as i32)
    }
}

/// Mean losses over one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub re: f64,
    pub rp: f64,
    pub rc: f64,
    pub total: f64,
    pub lr: f64,
    /// Wall-clock seconds spent in the epoch. Not part of any reproducible output.
    #[serde(skip)]
    pub wall_time: f64,
}

impl EpochMetrics {
    /// Everything except wall time, bit for bit.
    pub fn same_values(&self, other: &EpochMetrics) -> bool {
        self.epoch == other.epoch
            && [self.re, self.rp, self.rc, self.total, self.lr]
                .iter()
                .zip([other.re, other.rp, other.rc, other.total, other.lr])
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Adam moments.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub m: ParamGradient,
    pub v: ParamGradient,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &PotentialParams) -> Self {
        Self {
            m: ParamGradient::zeros_like(params),
            v: ParamGradient::zeros_like(params),
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update with decoupled weight decay, followed by
/// projecting every `w_j` entry onto `[0, ∞)`.
pub fn adam_step(
    params: &mut PotentialParams,
    state: &mut AdamState,
    grads: &ParamGradient,
    lr: f64,
    weight_decay: f64,
) -> Result<()> {
    let shapes_match = params
        .tensors()
        .iter()
        .zip(grads.tensors())
        .all(|((_, a), (_, b))| a.len() == b.len())
        && params.tensors().len() == grads.tensors().len();
    if !shapes_match {
        return Err(Error::InvalidArgument("gradient shape does not match parameters".into()));
    }
    state.t += 1;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    let g_t = grads.tensors();
    let mut m_t = state.m.tensors_mut();
    let mut v_t = state.v.tensors_mut();
    for (idx, (kind, param)) in params.tensors_mut().into_iter().enumerate() {
        let g = g_t[idx].1;
        let m = &mut m_t[idx].1;
        let v = &mut v_t[idx].1;
        for i in 0..param.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            let update = m_hat / (v_hat.sqrt() + eps) + weight_decay * param[i];
            param[i] -= lr * update;
            if kind.is_nonnegative() && param[i] < 0.0 {
                param[i] = 0.0;
            }
        }
    }
    Ok(())
}

/// Observation operator for one draw: the identity when everything is observed.
pub fn draw_operator(p: usize, fraction: f64, rng: &mut RngStream) -> Result<ForwardOperator> {
    if fraction == 1.0 {
        Ok(ForwardOperator::identity(p))
    } else {
        sample_mask(p, fraction, rng)
    }
}

const DATA_STREAM: u64 = 0x5EED_DA7A;
const SHUFFLE_STREAM: u64 = 0x5EED_5F1E;
const INIT_STREAM: u64 = 0x5EED_1417;

/// Output of [`fit`].
#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: PotentialParams,
    pub metrics: Vec<EpochMetrics>,
}

/// Trains a freshly initialized model on the columns of `data` (p×n).
pub fn fit(data: &Matrix, config: &TrainConfig) -> Result<FitResult> {
    config.validate()?;
    let m = &config.model;
    let mut rng = RngStream::new(config.seed, INIT_STREAM);
    let params = PotentialParams::init(data.rows(), m.q, m.ell, config.hyper(), &mut rng)?;
    fit_from(params, data, config)
}

/// Continues training from `params`, logging each epoch through `on_epoch`.
pub fn fit_from(params: PotentialParams, data: &Matrix, config: &TrainConfig) -> Result<FitResult> {
    fit_with_callback(params, data, config, |_| {})
}

pub fn fit_with_callback<F>(
    mut params: PotentialParams,
    data: &Matrix,
    config: &TrainConfig,
    mut on_epoch: F,
) -> Result<FitResult>
where
    F: FnMut(&EpochMetrics),
{
    config.validate()?;
    params.validate()?;
    let (p, n) = (data.rows(), data.cols());
    if n == 0 {
        return Err(Error::InvalidArgument("training data is empty".into()));
    }
    check_len("training data rows", params.p(), p)?;
    if config.batch_size > n {
        return Err(Error::InvalidArgument(format!(
            "batch_size {} exceeds sample count {n}",
            config.batch_size
        )));
    }
    let columns: Vec<Vec<f64>> = (0..n).map(|j| data.column(j)).collect();
    let data_rng = RngStream::new(config.seed, DATA_STREAM);
    let shuffle_rng = RngStream::new(config.seed, SHUFFLE_STREAM);
    let mut adam = AdamState::new(&params);
    let mut metrics = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let start = Instant::now();
        let lr = config.lr_at(epoch);
        let mut order: Vec<usize> = (0..n).collect();
        let mut shuffler = shuffle_rng.fork(epoch as u64);
        for i in (1..n).rev() {
            let j = shuffler.below(i + 1);
            order.swap(i, j);
        }
        let mut sums = Losses::default();
        let mut total_sum = 0.0;

        for (step, batch) in order.chunks(config.batch_size).enumerate() {
            let results: Vec<Result<(Losses, ParamGradient)>> = batch
                .par_iter()
                .map(|&i| {
                    let mut rng = data_rng.fork((epoch * n + i) as u64);
                    let op = draw_operator(p, config.mask_fraction, &mut rng)?;
                    let datum = make_latent(&columns[i], op, config.sigma, &mut rng)?;
                    loss_terms_and_grad(&params, &datum, &columns[i], config.alpha, config.gamma)
                })
                .collect();

            let mut grad = ParamGradient::zeros_like(&params);
            for result in results {
                let (losses, g) = result?;
                let total = losses.total(config.alpha, config.gamma);
                if !total.is_finite() || !g.is_finite() {
                    return Err(Error::Diverged {
                        epoch,
                        step,
                        detail: format!(
                            "loss terms R_e={} R_p={} R_c={}, max |grad| = {}",
                            losses.re,
                            losses.rp,
                            losses.rc,
                            g.max_abs()
                        ),
                    });
                }
                sums.re += losses.re;
                sums.rp += losses.rp;
                sums.rc += losses.rc;
                total_sum += total;
                grad.add_scaled(1.0, &g);
            }
            grad.scale(1.0 / batch.len() as f64);
            adam_step(&mut params, &mut adam, &grad, lr, config.weight_decay)?;
        }

        let inv = 1.0 / n as f64;
        let record = EpochMetrics {
            epoch,
            re: sums.re * inv,
            rp: sums.rp * inv,
            rc: sums.rc * inv,
            total: total_sum * inv,
            lr,
            wall_time: start.elapsed().as_secs_f64(),
        };
        on_epoch(&record);
        metrics.push(record);
    }
    Ok(FitResult { params, metrics })
}

/// Anything that maps latent data to a reconstruction of the full signal.
pub trait Estimator: Sync {
    fn estimate(&self, datum: &LatentDatum) -> Result<Vector>;
}

impl Estimator for PotentialParams {
    fn estimate(&self, datum: &LatentDatum) -> Result<Vector> {
        let traj = run_flow(self, datum)?;
        Ok(self.k.matvec_unchecked(traj.terminal()).into())
    }
}

/// MAP estimator under the prior `N(0, θ I)`: observed coordinates shrink by
/// `θ / (σ² + θ)`, unobserved ones fall back to the prior mean 0.
#[derive(Debug, Clone, Copy)]
pub struct GaussianShrinkage {
    pub theta: f64,
    pub sigma: f64,
}

impl Estimator for GaussianShrinkage {
    fn estimate(&self, datum: &LatentDatum) -> Result<Vector> {
        let w = self.theta / (self.sigma * self.sigma + self.theta);
        let scaled: Vec<f64> = datum.d.iter().map(|v| w * v).collect();
        match &datum.operator {
            ForwardOperator::Dense { .. } => Err(Error::InvalidArgument(
                "shrinkage estimator supports identity and mask operators".into(),
            )),
            op => Ok(op.apply_adjoint_unchecked(&scaled).into()),
        }
    }
}

/// Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub draws: usize,
}

/// Average of `‖x̂ − x‖²` over the columns of `x_eval` and `n_noise` fresh
/// `(P, ε)` draws each.
pub fn empirical_mse<E: Estimator + ?Sized>(
    estimator: &E,
    x_eval: &Matrix,
    sigma: f64,
    mask_fraction: f64,
    n_noise: usize,
    rng: &RngStream,
) -> Result<MseEstimate> {
    if n_noise == 0 {
        return Err(Error::InvalidArgument("n_noise must be at least 1".into()));
    }
    let (p, n) = (x_eval.rows(), x_eval.cols());
    if n == 0 {
        return Err(Error::InvalidArgument("no evaluation points".into()));
    }
    let columns: Vec<Vec<f64>> = (0..n).map(|j| x_eval.column(j)).collect();
    let errors: Vec<Result<f64>> = (0..n * n_noise)
        .into_par_iter()
        .map(|k| {
            let x = &columns[k / n_noise];
            let mut stream = rng.fork(k as u64);
            let op = draw_operator(p, mask_fraction, &mut stream)?;
            let datum = make_latent(x, op, sigma, &mut stream)?;
            let x_hat = estimator.estimate(&datum)?;
            Ok(x_hat.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum())
        })
        .collect();
    let values: Vec<f64> = errors.into_iter().collect::<Result<_>>()?;
    let count = values.len() as f64;
    let mean = values.iter().sum::<f64>() / count;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (count - 1.0).max(1.0);
    Ok(MseEstimate {
        mean,
        std_error: (var / count).sqrt(),
        draws: values.len(),
    })
}
