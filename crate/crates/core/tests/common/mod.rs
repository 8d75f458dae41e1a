#![allow(dead_code)]

use mrmap::flow::run_flow;
use mrmap::operators::{make_latent, sample_mask};
use mrmap::potential::Hyper;
use mrmap::{LatentDatum, Matrix, PotentialParams, RngStream, Vector};

/// Every learnable drawn at random, `w_j` uniform on `[0, 1)`.
pub fn random_params(p: usize, q: usize, ell: usize, cg_iters: usize, rng: &mut RngStream) -> PotentialParams {
    let hyper = Hyper {
        beta: 0.5 + rng.uniform(),
        h: 0.5 + 0.5 * rng.uniform(),
        sigma: 0.2,
        cg_iters,
    };
    let mut params = PotentialParams::init(p, q, ell, hyper, rng).expect("valid shapes");
    for layer in &mut params.layers {
        for v in layer.b.iter_mut() {
            *v = 0.5 * rng.normal();
        }
        for v in layer.w.iter_mut() {
            *v = rng.uniform();
        }
    }
    for v in params.r.iter_mut() {
        *v = 0.3 * rng.normal();
    }
    for v in params.omega_w.as_mut_slice() {
        *v = 0.3 * rng.normal();
    }
    for v in params.omega_b.iter_mut() {
        *v = 0.3 * rng.normal();
    }
    params
}

pub fn random_datum(p: usize, sigma: f64, rng: &mut RngStream) -> (Vec<f64>, LatentDatum) {
    let x = rng.normals(p);
    let fraction = (1 + rng.below(p)) as f64 / p as f64;
    let op = sample_mask(p, fraction, rng).expect("valid fraction");
    let datum = make_latent(&x, op, sigma, rng).expect("valid datum");
    (x, datum)
}

/// Smallest `|K_j u_j + b_j|` over the layers the flow evaluates.
pub fn kink_margin(params: &PotentialParams, datum: &LatentDatum) -> f64 {
    let traj = run_flow(params, datum).expect("flow runs");
    (1..params.ell())
        .flat_map(|j| params.layers[j].preactivation(&traj.u[j]))
        .fold(f64::INFINITY, |m, t| m.min(t.abs()))
}

pub fn random_trajectory(q: usize, ell: usize, scale: f64, rng: &mut RngStream) -> Vec<Vector> {
    (0..=ell)
        .map(|_| rng.normals(q).into_iter().map(|v| scale * v).collect::<Vec<_>>().into())
        .collect()
}

pub fn to_nalgebra(m: &Matrix) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn bits_equal(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// `A = U diag(s) Vᵀ` with singular values log-spaced in `[s_min, 1]`.
pub fn conditioned(m: usize, n: usize, s_min: f64, rng: &mut RngStream) -> Matrix {
    let gauss = |r: usize, c: usize, rng: &mut RngStream| nalgebra::DMatrix::from_row_slice(r, c, &rng.normals(r * c));
    let u = gauss(m, m, rng).qr().q();
    let v = gauss(n, n, rng).qr().q();
    let k = m.min(n);
    let mut s = nalgebra::DMatrix::zeros(m, n);
    for i in 0..k {
        let t = if k > 1 { i as f64 / (k - 1) as f64 } else { 0.0 };
        s[(i, i)] = s_min.powf(t);
    }
    let a = u * s * v.transpose();
    Matrix::new(m, n, a.transpose().as_slice().to_vec()).unwrap()
}
