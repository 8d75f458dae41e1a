//! The discrete least-action potential over a flow `u₀ … u_ℓ`:
//!
//! ```text
//! φ(u, θ) = ½ Σ_{j=1..ℓ} ‖u_j − u_{j−1}‖² + h² Σ_{j=0..ℓ−1} w_jᵀ f(K_j u_j + b_j) + rᵀ u_ℓ
//! ```
//!
//! with `f(t) = ½ max(t, 0)²` applied elementwise. `f` is convex and `w_j ≥ 0`,
//! so `φ` is convex in `u`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{axpy, dot, Matrix, Vector};
use crate::samplers::RngStream;

/// Squared-ReLU energy `½ max(t, 0)²`.
pub fn act(t: f64) -> f64 {
    let m = t.max(0.0);
    0.5 * m * m
}

/// Derivative of [`act`]: the ReLU `max(t, 0)`, with value 0 at the kink.
pub fn act_prime(t: f64) -> f64 {
    if t > 0.0 {
        t
    } else {
        0.0
    }
}

/// One potential-energy layer `w_jᵀ f(K_j u + b_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub k: Matrix,
    pub b: Vector,
    pub w: Vector,
}

impl Layer {
    pub fn preactivation(&self, u: &[f64]) -> Vec<f64> {
        let mut z = self.k.matvec_unchecked(u);
        axpy(1.0, &self.b, &mut z);
        z
    }

    /// `K_jᵀ (f'(K_j u + b_j) ⊙ w_j)`, the gradient of `w_jᵀ f(K_j u + b_j)`.
    pub fn force(&self, u: &[f64]) -> Vec<f64> {
        let z = self.preactivation(u);
        let m: Vec<f64> = z.iter().zip(self.w.iter()).map(|(&t, &w)| act_prime(t) * w).collect();
        self.k.matvec_t_unchecked(&m)
    }

    pub fn energy(&self, u: &[f64]) -> f64 {
        self.preactivation(u)
            .iter()
            .zip(self.w.iter())
            .map(|(&t, &w)| w * act(t))
            .sum()
    }
}

/// Fixed (non-learned) settings of the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    /// Data-fit / energy balance inside both solves.
    pub beta: f64,
    /// Step size of the leapfrog recurrence.
    pub h: f64,
    /// Noise standard deviation the model is trained for.
    pub sigma: f64,
    /// Iteration budget of the inner solves.
    pub cg_iters: usize,
}

impl Default for Hyper {
    fn default() -> Self {
        Self {
            beta: 1.0,
            h: 1.0,
            sigma: 1.0,
            cg_iters: 8,
        }
    }
}

/// All learnable parameters plus hyperparameters.
///
/// Shapes: `k` is p×q (decoder), each layer holds a q×q matrix and two
/// q-vectors, `omega_w`/`omega_b` parameterize the learned initializer
/// `u₁ = u₀ + tanh(W_ω u₀ + b_ω)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialParams {
    pub k: Matrix,
    pub layers: Vec<Layer>,
    pub r: Vector,
    pub omega_w: Matrix,
    pub omega_b: Vector,
    pub hyper: Hyper,
}

/// Which learnable a flat tensor belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamKind {
    Decoder,
    LayerMatrix(usize),
    LayerBias(usize),
    LayerWeight(usize),
    TerminalBias,
    InitMatrix,
    InitBias,
}

impl ParamKind {
    /// True for the `w_j`, which must stay nonnegative.
    pub fn is_nonnegative(self) -> bool {
        matches!(self, ParamKind::LayerWeight(_))
    }
}

impl fmt::Display for ParamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamKind::Decoder => write!(f, "K"),
            ParamKind::LayerMatrix(j) => write!(f, "K_{j}"),
            ParamKind::LayerBias(j) => write!(f, "b_{j}"),
            ParamKind::LayerWeight(j) => write!(f, "w_{j}"),
            ParamKind::TerminalBias => write!(f, "r"),
            ParamKind::InitMatrix => write!(f, "W_omega"),
            ParamKind::InitBias => write!(f, "b_omega"),
        }
    }
}

impl PotentialParams {
    /// All learnables zero. Every flow of this model is identically zero.
    pub fn zeros(p: usize, q: usize, ell: usize, hyper: Hyper) -> Self {
        Self {
            k: Matrix::zeros(p, q),
            layers: (0..ell)
                .map(|_| Layer {
                    k: Matrix::zeros(q, q),
                    b: Vector::zeros(q),
                    w: Vector::zeros(q),
                })
                .collect(),
            r: Vector::zeros(q),
            omega_w: Matrix::zeros(q, q),
            omega_b: Vector::zeros(q),
            hyper,
        }
    }

    /// Training initialization: `K`, `K_j` ~ N(0, 1/q), `b_j = 0`, `w_j = 10⁻²`,
    /// `r = 0`, `W_ω = 0`, `b_ω = 0` (so `u₁ = u₀` at the start).
    pub fn init(p: usize, q: usize, ell: usize, hyper: Hyper, rng: &mut RngStream) -> Result<Self> {
        let mut params = Self::zeros(p, q, ell, hyper);
        params.validate()?;
        let scale = 1.0 / (q as f64).sqrt();
        for v in params.k.as_mut_slice() {
            *v = scale * rng.normal();
        }
        for layer in &mut params.layers {
            for v in layer.k.as_mut_slice() {
                *v = scale * rng.normal();
            }
            layer.w.iter_mut().for_each(|w| *w = 1e-2);
        }
        Ok(params)
    }

    pub fn p(&self) -> usize {
        self.k.rows()
    }

    pub fn q(&self) -> usize {
        self.k.cols()
    }

    pub fn ell(&self) -> usize {
        self.layers.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (p, q) = (self.p(), self.q());
        if self.layers.is_empty() {
            return Err(Error::InvalidArgument("need at least one layer".into()));
        }
        if q < p {
            return Err(Error::InvalidArgument(format!(
                "embedding dimension q = {q} must be at least p = {p}"
            )));
        }
        let hp = &self.hyper;
        if !(hp.beta > 0.0 && hp.h > 0.0 && hp.sigma > 0.0) {
            return Err(Error::InvalidArgument("beta, h and sigma must be positive".into()));
        }
        for layer in &self.layers {
            check_len("layer matrix rows", q, layer.k.rows())?;
            check_len("layer matrix cols", q, layer.k.cols())?;
            check_len("layer bias", q, layer.b.len())?;
            check_len("layer weight", q, layer.w.len())?;
            if layer.w.iter().any(|&w| w < 0.0) {
                return Err(Error::InvalidArgument("layer weights w_j must be nonnegative".into()));
            }
        }
        check_len("terminal bias", q, self.r.len())?;
        check_len("initializer rows", q, self.omega_w.rows())?;
        check_len("initializer cols", q, self.omega_w.cols())?;
        check_len("initializer bias", q, self.omega_b.len())?;
        Ok(())
    }

    /// Learnable tensors in canonical order.
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

    /// Mutable learnable tensors in the same order as [`tensors`](Self::tensors).
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

    pub fn num_learnables(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    fn layer(&self, j: usize) -> Result<&Layer> {
        self.layers.get(j).ok_or(Error::IndexOutOfRange {
            index: j,
            len: self.layers.len(),
        })
    }

    /// `w_jᵀ f(K_j u_j + b_j)`.
    pub fn layer_energy(&self, j: usize, u: &[f64]) -> Result<f64> {
        let layer = self.layer(j)?;
        check_len("layer input", self.q(), u.len())?;
        Ok(layer.energy(u))
    }

    fn check_trajectory(&self, u: &[Vector]) -> Result<()> {
        check_len("trajectory blocks", self.ell() + 1, u.len())?;
        for block in u {
            check_len("trajectory block", self.q(), block.len())?;
        }
        Ok(())
    }

    /// Kinetic part `½ Σ ‖u_j − u_{j−1}‖²`.
    pub fn kinetic_energy(&self, u: &[Vector]) -> Result<f64> {
        self.check_trajectory(u)?;
        Ok(u.windows(2)
            .map(|w| {
                w[1].iter()
                    .zip(w[0].iter())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            })
            .sum::<f64>()
            * 0.5)
    }

    /// `φ(u, θ)` for a full trajectory `u₀ … u_ℓ`.
    pub fn potential_value(&self, u: &[Vector]) -> Result<f64> {
        let kinetic = self.kinetic_energy(u)?;
        let h2 = self.hyper.h * self.hyper.h;
        let layered: f64 = self
            .layers
            .iter()
            .zip(u)
            .map(|(layer, uj)| layer.energy(uj))
            .sum();
        Ok(kinetic + h2 * layered + dot(&self.r, &u[self.ell()]))
    }

    /// `∂φ/∂u_j` for every block.
    pub fn potential_grad_u(&self, u: &[Vector]) -> Result<Vec<Vector>> {
        self.check_trajectory(u)?;
        let ell = self.ell();
        let h2 = self.hyper.h * self.hyper.h;
        let mut grads: Vec<Vector> = Vec::with_capacity(ell + 1);
        for j in 0..=ell {
            let mut g = vec![0.0; self.q()];
            if j > 0 {
                axpy(1.0, &u[j], &mut g);
                axpy(-1.0, &u[j - 1], &mut g);
            }
            if j < ell {
                axpy(-1.0, &u[j + 1], &mut g);
                axpy(1.0, &u[j], &mut g);
                axpy(h2, &self.layers[j].force(&u[j]), &mut g);
            } else {
                axpy(1.0, &self.r, &mut g);
            }
            grads.push(g.into());
        }
        Ok(grads)
    }
}

/// The forward flow `u₀ … u_ℓ` and the terminal-solve vector `q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowTrajectory {
    pub u: Vec<Vector>,
    pub q_vec: Vector,
}

impl FlowTrajectory {
    pub fn terminal(&self) -> &Vector {
        self.u.last().expect("trajectory has at least two blocks")
    }

    pub fn initial(&self) -> &Vector {
        &self.u[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_dim(ell: usize) -> PotentialParams {
        PotentialParams::zeros(1, 1, ell, Hyper::default())
    }

    fn v(x: &[f64]) -> Vector {
        Vector::from(x.to_vec())
    }

    #[test]
    fn activation_pair() {
        assert_eq!((act(2.0), act_prime(2.0)), (2.0, 2.0));
        assert_eq!((act(-1.0), act_prime(-1.0)), (0.0, 0.0));
        assert_eq!((act(0.0), act_prime(0.0)), (0.0, 0.0));
    }

    #[test]
    fn layer_energy_examples() {
        let mut params = PotentialParams::zeros(2, 2, 1, Hyper::default());
        params.layers[0].k = Matrix::identity(2);
        params.layers[0].w = v(&[1.0, 1.0]);
        assert_eq!(params.layer_energy(0, &[1.0, -1.0]).unwrap(), 0.5);

        params.layers[0].w = v(&[0.0, 0.0]);
        assert_eq!(params.layer_energy(0, &[3.0, 7.0]).unwrap(), 0.0);
        assert!(matches!(params.layer_energy(1, &[0.0, 0.0]), Err(Error::IndexOutOfRange { .. })));

        let mut scalar = one_dim(1);
        scalar.layers[0].b = v(&[2.0]);
        scalar.layers[0].w = v(&[3.0]);
        assert_eq!(scalar.layer_energy(0, &[-5.0]).unwrap(), 6.0);
        assert_eq!(scalar.layer_energy(0, &[11.0]).unwrap(), 6.0);
    }

    #[test]
    fn potential_value_examples() {
        let mut params = one_dim(1);
        params.layers[0].k = Matrix::identity(1);
        params.layers[0].w = v(&[1.0]);
        params.r = v(&[0.5]);
        let u = [v(&[1.0]), v(&[3.0])];
        assert!((params.potential_value(&u).unwrap() - 4.0).abs() < 1e-15);

        let mut flat = one_dim(3);
        flat.r = v(&[2.5]);
        let zeros = vec![v(&[0.0]); 4];
        assert_eq!(flat.potential_value(&zeros).unwrap(), 0.0);

        let kinetic = one_dim(2);
        let u = [v(&[0.0]), v(&[1.0]), v(&[3.0])];
        assert_eq!(kinetic.potential_value(&u).unwrap(), 0.5 * (1.0 + 4.0));
        assert!(kinetic.potential_value(&u[..2]).is_err());
    }

    #[test]
    fn pure_kinetic_gradient() {
        let params = one_dim(2);
        let u = [v(&[0.0]), v(&[1.0]), v(&[2.0])];
        let g = params.potential_grad_u(&u).unwrap();
        let flat: Vec<f64> = g.iter().map(|b| b[0]).collect();
        assert_eq!(flat, vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn constant_trajectory_gradient_is_r_at_end() {
        let mut params = PotentialParams::zeros(1, 2, 2, Hyper::default());
        params.r = v(&[0.3, -0.7]);
        let u = vec![v(&[1.5, -2.0]); 3];
        let g = params.potential_grad_u(&u).unwrap();
        assert_eq!(g[0].as_slice(), &[0.0, 0.0]);
        assert_eq!(g[1].as_slice(), &[0.0, 0.0]);
        assert_eq!(g[2].as_slice(), &[0.3, -0.7]);
    }

    #[test]
    fn validate_catches_bad_shapes() {
        let mut params = PotentialParams::zeros(3, 2, 1, Hyper::default());
        assert!(params.validate().is_err());
        params = PotentialParams::zeros(2, 2, 1, Hyper::default());
        params.validate().unwrap();
        params.layers[0].w[0] = -1.0;
        assert!(params.validate().is_err());
        let empty = PotentialParams::zeros(2, 2, 0, Hyper::default());
        assert!(empty.validate().is_err());
    }

    #[test]
    fn tensor_layout_is_consistent() {
        let mut params = PotentialParams::zeros(2, 3, 2, Hyper::default());
        let shapes: Vec<usize> = params.tensors().iter().map(|(_, t)| t.len()).collect();
        assert_eq!(shapes, vec![6, 9, 3, 3, 9, 3, 3, 3, 9, 3]);
        let kinds: Vec<ParamKind> = params.tensors_mut().into_iter().map(|(k, _)| k).collect();
        assert_eq!(kinds[3], ParamKind::LayerWeight(0));
        assert_eq!(params.num_learnables(), 51);
    }
}
