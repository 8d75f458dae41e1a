//! Forward pass of the hyperbolic network.
//!
//! ```text
//! u₀ = (KᵀPᵀPK + βI)⁻¹ KᵀPᵀd
//! u₁ = u₀ + tanh(W_ω u₀ + b_ω)
//! u_{j+1} = 2u_j − u_{j−1} + h² K_jᵀ (f'(K_j u_j + b_j) ⊙ w_j)      j = 1 … ℓ−1
//! q  = (KᵀPᵀPK + βI)⁻¹ (KᵀPᵀd + β u_{ℓ−1} + β r)
//! x̂  = K u_ℓ
//! ```
//!
//! Both solves run the fixed-budget Krylov iteration from [`crate::linalg`].

use crate::error::{check_len, Result};
use crate::linalg::{axpy, conjugate_residual, KrylovTape, SolveOptions, Vector};
use crate::operators::LatentDatum;
use crate::potential::{act_prime, FlowTrajectory, PotentialParams};

fn solver_options(params: &PotentialParams) -> SolveOptions {
    SolveOptions::new(params.hyper.cg_iters, 0.0)
}

/// `M v = KᵀPᵀPK v + β v` for the datum's operator.
pub(crate) fn normal_apply(params: &PotentialParams, datum: &LatentDatum, v: &[f64]) -> Vec<f64> {
    let kv = params.k.matvec_unchecked(v);
    let g = datum.operator.gram_apply(&kv);
    let mut out = params.k.matvec_t_unchecked(&g);
    axpy(params.hyper.beta, v, &mut out);
    out
}

/// `KᵀPᵀd`.
pub(crate) fn data_rhs(params: &PotentialParams, datum: &LatentDatum) -> Vec<f64> {
    let ptd = datum.operator.apply_adjoint_unchecked(&datum.d);
    params.k.matvec_t_unchecked(&ptd)
}

fn check_datum(params: &PotentialParams, datum: &LatentDatum) -> Result<()> {
    check_len("operator input dimension", params.p(), datum.operator.input_dim())?;
    check_len("latent data", datum.operator.output_dim(), datum.d.len())
}

/// Data-fitted initial embedding `u₀`.
pub fn initial_embed(params: &PotentialParams, datum: &LatentDatum) -> Result<Vector> {
    check_datum(params, datum)?;
    let run = conjugate_residual(
        |v| normal_apply(params, datum, v),
        data_rhs(params, datum),
        solver_options(params),
        false,
    );
    Ok(run.solution.into())
}

/// Learned initializer `u₁ = u₀ + tanh(W_ω u₀ + b_ω)`.
pub fn initialize_u1(params: &PotentialParams, u0: &[f64]) -> Result<Vector> {
    check_len("initializer input", params.q(), u0.len())?;
    let mut z = params.omega_w.matvec_unchecked(u0);
    axpy(1.0, &params.omega_b, &mut z);
    Ok(u0.iter().zip(&z).map(|(u, z)| u + z.tanh()).collect::<Vec<_>>().into())
}

/// One leapfrog step `u_{j+1} = 2u_j − u_{j−1} + h² K_jᵀ(f'(K_j u_j + b_j) ⊙ w_j)`, `1 ≤ j ≤ ℓ−1`.
pub fn hyperbolic_step(
    params: &PotentialParams,
    j: usize,
    u_j: &[f64],
    u_jm1: &[f64],
) -> Result<Vector> {
    if j == 0 || j >= params.ell() {
        return Err(crate::error::Error::IndexOutOfRange {
            index: j,
            len: params.ell(),
        });
    }
    check_len("step input", params.q(), u_j.len())?;
    check_len("step input", params.q(), u_jm1.len())?;
    Ok(leapfrog(params, j, u_j, u_jm1).0.into())
}

/// Returns the next state and the step's preactivation.
fn leapfrog(params: &PotentialParams, j: usize, u_j: &[f64], u_jm1: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let layer = &params.layers[j];
    let pre = layer.preactivation(u_j);
    let m: Vec<f64> = pre.iter().zip(layer.w.iter()).map(|(&t, &w)| act_prime(t) * w).collect();
    let force = layer.k.matvec_t_unchecked(&m);
    let h2 = params.hyper.h * params.hyper.h;
    let next = u_j
        .iter()
        .zip(u_jm1)
        .zip(&force)
        .map(|((a, b), f)| 2.0 * a - b + h2 * f)
        .collect();
    (next, pre)
}

/// Decoder `x̂ = K u_ℓ`.
pub fn decode(params: &PotentialParams, u_ell: &[f64]) -> Result<Vector> {
    Ok(params.k.matvec(u_ell)?.into())
}

/// Runs the full network on one datum.
pub fn run_flow(params: &PotentialParams, datum: &LatentDatum) -> Result<FlowTrajectory> {
    forward(params, datum, false).map(|(traj, _)| traj)
}

/// Intermediates needed by the reverse pass.
pub(crate) struct FlowTape {
    pub initial_solve: KrylovTape,
    pub terminal_solve: KrylovTape,
    /// `tanh(W_ω u₀ + b_ω)`.
    pub init_tanh: Vec<f64>,
    /// Preactivations `K_j u_j + b_j` for j = 1 … ℓ−1 (index j−1).
    pub preacts: Vec<Vec<f64>>,
}

pub(crate) fn forward(
    params: &PotentialParams,
    datum: &LatentDatum,
    record: bool,
) -> Result<(FlowTrajectory, Option<FlowTape>)> {
    check_datum(params, datum)?;
    let ell = params.ell();
    let opts = solver_options(params);
    let apply_m = |v: &[f64]| normal_apply(params, datum, v);
    let rhs = data_rhs(params, datum);

    let initial = conjugate_residual(apply_m, rhs.clone(), opts, record);
    let u0 = initial.solution;

    let mut z = params.omega_w.matvec_unchecked(&u0);
    axpy(1.0, &params.omega_b, &mut z);
    let init_tanh: Vec<f64> = z.iter().map(|v| v.tanh()).collect();
    let u1: Vec<f64> = u0.iter().zip(&init_tanh).map(|(u, t)| u + t).collect();

    let mut u: Vec<Vec<f64>> = Vec::with_capacity(ell + 1);
    u.push(u0);
    u.push(u1);
    let mut preacts = Vec::with_capacity(ell.saturating_sub(1));
    for j in 1..ell {
        let (next, pre) = leapfrog(params, j, &u[j], &u[j - 1]);
        u.push(next);
        if record {
            preacts.push(pre);
        }
    }

    let mut terminal_rhs = rhs;
    let beta = params.hyper.beta;
    axpy(beta, &u[ell - 1], &mut terminal_rhs);
    axpy(beta, &params.r, &mut terminal_rhs);
    let terminal = conjugate_residual(apply_m, terminal_rhs, opts, record);

    let tape = if record {
        Some(FlowTape {
            initial_solve: initial.tape.expect("recorded"),
            terminal_solve: terminal.tape.expect("recorded"),
            init_tanh,
            preacts,
        })
    } else {
        None
    };
    let traj = FlowTrajectory {
        u: u.into_iter().map(Vector::from).collect(),
        q_vec: terminal.solution.into(),
    };
    Ok((traj, tape))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::operators::ForwardOperator;
    use crate::potential::Hyper;

    fn datum(d: &[f64]) -> LatentDatum {
        LatentDatum::new(d.to_vec().into(), ForwardOperator::identity(d.len()), 0.1).unwrap()
    }

    fn params_with_k(k: Matrix, ell: usize) -> PotentialParams {
        let (p, q) = (k.rows(), k.cols());
        let mut params = PotentialParams::zeros(p, q, ell, Hyper::default());
        params.k = k;
        params
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn initial_embed_examples() {
        let params = params_with_k(Matrix::identity(2), 1);
        let u0 = initial_embed(&params, &datum(&[2.0, 4.0])).unwrap();
        assert!(close(&u0, &[1.0, 2.0], 1e-12));
        let zero = initial_embed(&params, &datum(&[0.0, 0.0])).unwrap();
        assert_eq!(zero.as_slice(), &[0.0, 0.0]);
        let params = params_with_k(Matrix::diag(&[2.0, 1.0]), 1);
        let u0 = initial_embed(&params, &datum(&[5.0, 2.0])).unwrap();
        assert!(close(&u0, &[2.0, 1.0], 1e-12));
    }

    #[test]
    fn initializer_examples() {
        let mut params = params_with_k(Matrix::identity(1), 1);
        let u1 = initialize_u1(&params, &[0.7]).unwrap();
        assert_eq!(u1.as_slice(), &[0.7]);
        params.omega_b = vec![20.0].into();
        let u1 = initialize_u1(&params, &[0.7]).unwrap();
        assert!((u1[0] - 1.7).abs() < 1e-8);
        assert!(initialize_u1(&params, &[0.7, 1.0]).is_err());
    }

    #[test]
    fn hyperbolic_step_examples() {
        let mut params = params_with_k(Matrix::identity(2), 3);
        let free = hyperbolic_step(&params, 1, &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert_eq!(free.as_slice(), &[2.0, 2.0]);

        params.layers[1].k = Matrix::identity(2);
        params.layers[1].w = vec![1.0, 1.0].into();
        let forced = hyperbolic_step(&params, 1, &[1.0, -1.0], &[0.0, 0.0]).unwrap();
        assert_eq!(forced.as_slice(), &[3.0, -2.0]);

        let rest = hyperbolic_step(&params, 2, &[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(rest.as_slice(), &[0.0, 0.0]);

        assert!(hyperbolic_step(&params, 0, &[0.0, 0.0], &[0.0, 0.0]).is_err());
        assert!(hyperbolic_step(&params, 3, &[0.0, 0.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn decode_examples() {
        let k = Matrix::from_rows(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]).unwrap();
        let params = params_with_k(k, 1);
        assert_eq!(decode(&params, &[4.0, -1.0, 9.0]).unwrap().as_slice(), &[4.0, -1.0]);
        assert_eq!(decode(&params, &[0.0; 3]).unwrap().as_slice(), &[0.0, 0.0]);
        let params = params_with_k(Matrix::from_rows(&[&[1.0, 2.0], &[0.0, 1.0]]).unwrap(), 1);
        assert_eq!(decode(&params, &[1.0, 1.0]).unwrap().as_slice(), &[3.0, 1.0]);
        assert!(decode(&params, &[1.0]).is_err());
    }

    #[test]
    fn depth_one_flow_has_two_blocks() {
        let mut params = params_with_k(Matrix::identity(2), 1);
        params.omega_b = vec![0.5, -0.5].into();
        let traj = run_flow(&params, &datum(&[2.0, 4.0])).unwrap();
        assert_eq!(traj.u.len(), 2);
        let u1 = initialize_u1(&params, &traj.u[0]).unwrap();
        assert_eq!(traj.u[1], u1);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let params = params_with_k(Matrix::identity(2), 2);
        assert!(run_flow(&params, &datum(&[1.0, 2.0, 3.0])).is_err());
    }
}
