//! One forward pass of the hyperbolic network: the trajectory, the leapfrog
//! residuals, the potential value, and the consistency mismatch `‖q − u_ℓ‖`.

use mrmap::flow::{hyperbolic_step, run_flow};
use mrmap::operators::{make_latent, sample_mask};
use mrmap::potential::Hyper;
use mrmap::{PotentialParams, Result, RngStream};

fn main() -> Result<()> {
    let (p, q, ell) = (16, 32, 5);
    let mut rng = RngStream::new(11, 0);
    let params = PotentialParams::init(p, q, ell, Hyper::default(), &mut rng)?;
    let x = rng.normals(p);
    let op = sample_mask(p, 0.5, &mut rng)?;
    let datum = make_latent(&x, op, 0.1, &mut rng)?;

    let traj = run_flow(&params, &datum)?;
    for (j, u) in traj.u.iter().enumerate() {
        println!("|u_{j}| = {:.4}", u.norm());
    }
    for j in 1..ell {
        let next = hyperbolic_step(&params, j, &traj.u[j], &traj.u[j - 1])?;
        let res = next.iter().zip(traj.u[j + 1].iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!("leapfrog residual at j = {j}: {res:.1e}");
    }
    let mismatch: f64 = traj.q_vec.iter().zip(traj.terminal().iter()).map(|(a, b)| (a - b).powi(2)).sum();
    println!("phi(u) = {:.4}", params.potential_value(&traj.u)?);
    println!("|q - u_ell|^2 = {mismatch:.4e}");

    let zero = PotentialParams::zeros(p, q, ell, Hyper::default());
    let z = run_flow(&zero, &datum)?;
    let rc: f64 = z.q_vec.iter().zip(z.terminal().iter()).map(|(a, b)| (a - b).powi(2)).sum();
    println!("all-zero model: |q - u_ell|^2 = {rc}");
    Ok(())
}
