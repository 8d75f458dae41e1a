//! Reverse-mode gradients of the training loss through the unrolled network,
//! including both fixed-budget Krylov solves, and a finite-difference checker.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};
use crate::flow::{self, FlowTape};
use crate::linalg::{axpy, Matrix, Vector};
use crate::operators::LatentDatum;
use crate::potential::{Layer, ParamKind, PotentialParams};
use crate::train::{compute_losses, Losses};

/// Gradient with the same layout as the learnables of [`PotentialParams`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGradient {
    pub k: Matrix,
    pub layers: Vec<Layer>,
    pub r: Vector,
    pub omega_w: Matrix,
    pub omega_b: Vector,
}

impl ParamGradient {
    pub fn zeros_like(params: &PotentialParams) -> Self {
        let q = params.q();
        Self {
            k: Matrix::zeros(params.p(), q),
            layers: (0..params.ell())
                .map(|_| Layer {
                    k: Matrix::zeros(q, q),
                    b: Vector::zeros(q),
                    w: Vector::zeros(q),
                })
                .collect(),
            r: Vector::zeros(q),
            omega_w: Matrix::zeros(q, q),
            omega_b: Vector::zeros(q),
        }
    }

    /// Tensors in the canonical order of [`PotentialParams::tensors`].
    pub fn tensors(&self) -> Vec<(ParamKind, &[f64])> {
        let mut out: Vec<(ParamKind, &[f64])> = vec![(ParamKind::Decoder, self.k.as_slice())];
        for (j, layer) in self.layers.iter().enumerate() {
            out.push((ParamKind::LayerMatrix(j), layer.k.as_slice()));
            out.push((ParamKind::LayerBias(j), &layer.b));
            out.push((ParamKind::LayerWeight(j), &layer.w));
        }
        out.push((ParamKind::TerminalBias, &self.r));
        out.push((ParamKind::InitMatrix, self.omega_w.as_slice()));
        out.push((ParamKind::InitBias, &self.omega_b));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(ParamKind, &mut [f64])> {
        let mut out: Vec<(ParamKind, &mut [f64])> =
            vec![(ParamKind::Decoder, self.k.as_mut_slice())];
        for (j, layer) in self.layers.iter_mut().enumerate() {
            out.push((ParamKind::LayerMatrix(j), layer.k.as_mut_slice()));
            out.push((ParamKind::LayerBias(j), &mut layer.b));
            out.push((ParamKind::LayerWeight(j), &mut layer.w));
        }
        out.push((ParamKind::TerminalBias, &mut self.r));
        out.push((ParamKind::InitMatrix, self.omega_w.as_mut_slice()));
        out.push((ParamKind::InitBias, &mut self.omega_b));
        out
    }

    /// `self += scale · other`.
    pub fn add_scaled(&mut self, scale: f64, other: &ParamGradient) {
        for ((_, dst), (_, src)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            axpy(scale, src, dst);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, t) in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|(_, t)| t.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Accumulates `∂/∂K` of `ȳᵀ M v` with `M = KᵀDK + βI`, `D = PᵀP`:
/// `K̄ += (D K v) ȳᵀ + (D K ȳ) vᵀ`.
fn normal_operator_vjp(
    params: &PotentialParams,
    datum: &LatentDatum,
    v: &[f64],
    ybar: &[f64],
    kbar: &mut Matrix,
) {
    let dkv = datum.operator.gram_apply(&params.k.matvec_unchecked(v));
    let dky = datum.operator.gram_apply(&params.k.matvec_unchecked(ybar));
    kbar.add_outer(1.0, &dkv, ybar);
    kbar.add_outer(1.0, &dky, v);
}

/// Total loss `R_e + α R_p + γ R_c` of one sample and its exact gradient
/// through the computed network.
pub fn loss_and_grad(
    params: &PotentialParams,
    datum: &LatentDatum,
    x_true: &[f64],
    alpha: f64,
    gamma: f64,
) -> Result<(f64, ParamGradient)> {
    loss_terms_and_grad(params, datum, x_true, alpha, gamma)
        .map(|(losses, g)| (losses.total(alpha, gamma), g))
}

/// Like [`loss_and_grad`] but returns the individual loss terms.
pub fn loss_terms_and_grad(
    params: &PotentialParams,
    datum: &LatentDatum,
    x_true: &[f64],
    alpha: f64,
    gamma: f64,
) -> Result<(Losses, ParamGradient)> {
    check_len("target", params.p(), x_true.len())?;
    let (traj, tape) = flow::forward(params, datum, true)?;
    let tape = tape.expect("recorded forward pass");
    let losses = compute_losses(params, &traj, datum, x_true)?;
    let grad = backward(params, datum, x_true, alpha, gamma, &traj.u, &traj.q_vec, &tape);
    Ok((losses, grad))
}

#[allow(clippy::too_many_arguments)]
fn backward(
    params: &PotentialParams,
    datum: &LatentDatum,
    x_true: &[f64],
    alpha: f64,
    gamma: f64,
    u: &[Vector],
    q_vec: &[f64],
    tape: &FlowTape,
) -> ParamGradient {
    let ell = params.ell();
    let q = params.q();
    let beta = params.hyper.beta;
    let h2 = params.hyper.h * params.hyper.h;
    let mut g = ParamGradient::zeros_like(params);
    let mut ubar: Vec<Vec<f64>> = vec![vec![0.0; q]; ell + 1];
    let apply_m = |v: &[f64]| flow::normal_apply(params, datum, v);

    // Loss head: R_e = ‖K u_ℓ − x‖², R_p = ‖P(K u_ℓ − x)‖², R_c = ‖q − u_ℓ‖².
    let x_hat = params.k.matvec_unchecked(&u[ell]);
    let err: Vec<f64> = x_hat.iter().zip(x_true).map(|(a, b)| a - b).collect();
    let mut xhat_bar: Vec<f64> = err.iter().map(|e| 2.0 * e).collect();
    axpy(2.0 * alpha, &datum.operator.gram_apply(&err), &mut xhat_bar);
    g.k.add_outer(1.0, &xhat_bar, &u[ell]);
    axpy(1.0, &params.k.matvec_t_unchecked(&xhat_bar), &mut ubar[ell]);

    let qbar: Vec<f64> = q_vec.iter().zip(u[ell].iter()).map(|(a, b)| 2.0 * gamma * (a - b)).collect();
    axpy(-1.0, &qbar, &mut ubar[ell]);

    // Terminal solve q = M⁻¹(KᵀPᵀd + β u_{ℓ−1} + β r).
    let ptd = datum.operator.apply_adjoint_unchecked(&datum.d);
    {
        let kbar = &mut g.k;
        let cbar = tape.terminal_solve.backward(&qbar, apply_m, |v, ybar| {
            normal_operator_vjp(params, datum, v, ybar, kbar)
        });
        kbar.add_outer(1.0, &ptd, &cbar);
        axpy(beta, &cbar, &mut ubar[ell - 1]);
        axpy(beta, &cbar, &mut g.r);
    }

    // Leapfrog steps in reverse.
    for j in (1..ell).rev() {
        let layer = &params.layers[j];
        let pre = &tape.preacts[j - 1];
        let next_bar = std::mem::take(&mut ubar[j + 1]);
        axpy(2.0, &next_bar, &mut ubar[j]);
        axpy(-1.0, &next_bar, &mut ubar[j - 1]);

        // force = K_jᵀ m, m = relu(pre) ⊙ w ; contribution h² · force.
        let t: Vec<f64> = next_bar.iter().map(|v| h2 * v).collect();
        let relu: Vec<f64> = pre.iter().map(|&z| if z > 0.0 { z } else { 0.0 }).collect();
        let m: Vec<f64> = relu.iter().zip(layer.w.iter()).map(|(a, w)| a * w).collect();
        let lg = &mut g.layers[j];
        lg.k.add_outer(1.0, &m, &t);
        let mbar = layer.k.matvec_unchecked(&t);
        let mut prebar = vec![0.0; q];
        for i in 0..q {
            lg.w[i] += mbar[i] * relu[i];
            if pre[i] > 0.0 {
                prebar[i] = mbar[i] * layer.w[i];
            }
        }
        lg.k.add_outer(1.0, &prebar, &u[j]);
        axpy(1.0, &prebar, &mut lg.b);
        axpy(1.0, &layer.k.matvec_t_unchecked(&prebar), &mut ubar[j]);
    }

    // Initializer u₁ = u₀ + tanh(W_ω u₀ + b_ω).
    let u1_bar = std::mem::take(&mut ubar[1]);
    axpy(1.0, &u1_bar, &mut ubar[0]);
    let zbar: Vec<f64> = u1_bar
        .iter()
        .zip(&tape.init_tanh)
        .map(|(b, t)| b * (1.0 - t * t))
        .collect();
    g.omega_w.add_outer(1.0, &zbar, &u[0]);
    axpy(1.0, &zbar, &mut g.omega_b);
    axpy(1.0, &params.omega_w.matvec_t_unchecked(&zbar), &mut ubar[0]);

    // Initial solve u₀ = M⁻¹ KᵀPᵀd.
    let kbar = &mut g.k;
    let cbar = tape
        .initial_solve
        .backward(&ubar[0], apply_m, |v, ybar| normal_operator_vjp(params, datum, v, ybar, kbar));
    kbar.add_outer(1.0, &ptd, &cbar);

    g
}

/// Total loss of one sample (forward only).
pub fn sample_loss(
    params: &PotentialParams,
    datum: &LatentDatum,
    x_true: &[f64],
    alpha: f64,
    gamma: f64,
) -> Result<f64> {
    let traj = flow::run_flow(params, datum)?;
    compute_losses(params, &traj, datum, x_true).map(|l| l.total(alpha, gamma))
}

/// Per-entry comparison produced by [`fd_report`].
#[derive(Debug, Clone)]
pub struct FdEntry {
    pub kind: ParamKind,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

/// Maximum over all learnable entries of
/// `|analytic − central difference| / max(|analytic|, |central difference|, 1e−8)`.
pub fn fd_check(
    params: &PotentialParams,
    datum: &LatentDatum,
    x_true: &[f64],
    alpha: f64,
    gamma: f64,
    step: f64,
) -> Result<f64> {
    Ok(fd_report(params, datum, x_true, alpha, gamma, step)?
        .iter()
        .fold(0.0f64, |m, e| m.max(e.rel_error)))
}

/// Every entry's analytic and central-difference derivative.
pub fn fd_report(
    params: &PotentialParams,
    datum: &LatentDatum,
    x_true: &[f64],
    alpha: f64,
    gamma: f64,
    step: f64,
) -> Result<Vec<FdEntry>> {
    if !(1e-8..=1e-4).contains(&step) {
        return Err(crate::error::Error::InvalidArgument(format!(
            "finite-difference step must lie in [1e-8, 1e-4], got {step}"
        )));
    }
    let (_, grad) = loss_and_grad(params, datum, x_true, alpha, gamma)?;
    let analytic: Vec<(ParamKind, Vec<f64>)> =
        grad.tensors().into_iter().map(|(k, t)| (k, t.to_vec())).collect();
    let mut probe = params.clone();
    let mut out = Vec::new();
    for (t_idx, (kind, values)) in analytic.iter().enumerate() {
        for (i, &a) in values.iter().enumerate() {
            let original = probe.tensors()[t_idx].1[i];
            set_entry(&mut probe, t_idx, i, original + step);
            let plus = sample_loss(&probe, datum, x_true, alpha, gamma)?;
            set_entry(&mut probe, t_idx, i, original - step);
            let minus = sample_loss(&probe, datum, x_true, alpha, gamma)?;
            set_entry(&mut probe, t_idx, i, original);
            let numeric = (plus - minus) / (2.0 * step);
            let denom = a.abs().max(numeric.abs()).max(1e-8);
            out.push(FdEntry {
                kind: *kind,
                index: i,
                analytic: a,
                numeric,
                rel_error: (a - numeric).abs() / denom,
            });
        }
    }
    Ok(out)
}

fn set_entry(params: &mut PotentialParams, tensor: usize, index: usize, value: f64) {
    let mut tensors = params.tensors_mut();
    tensors[tensor].1[index] = value;
}
