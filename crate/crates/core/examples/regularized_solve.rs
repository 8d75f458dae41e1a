//! The matrix-free regularized least-squares solver against a dense Cholesky
//! solve, with its residual history.

use mrmap::linalg::{solve_regularized_report, SolveOptions};
use mrmap::{Matrix, Result, RngStream};

fn main() -> Result<()> {
    let (m, n, beta) = (12, 8, 0.1);
    let mut rng = RngStream::new(5, 0);
    let a = Matrix::new(m, n, rng.normals(m * n))?;
    let b = rng.normals(m);

    let report = solve_regularized_report(
        |v| a.matvec(v).expect("shape"),
        |v| a.matvec_t(v).expect("shape"),
        &b,
        beta,
        None,
        SolveOptions::new(n, 0.0),
    )?;

    let mut normal = a.transpose().matmul(&a)?;
    for i in 0..n {
        normal.set(i, i, normal.get(i, i) + beta);
    }
    let dense = normal.solve_spd(&a.matvec_t(&b)?)?;
    let diff = report.solution.iter().zip(&dense).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);

    println!("iterations: {}", report.iterations);
    for (k, r) in report.residual_norms.iter().enumerate() {
        println!("  residual[{k}] = {r:.3e}");
    }
    println!("max |iterative - dense| = {diff:.3e}");
    Ok(())
}
