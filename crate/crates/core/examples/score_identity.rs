//! The score identity `E ∂_θ φ = −∂_θ log Z` for `φ(x, θ) = x²/(2θ)`, checked
//! analytically and by Monte Carlo.

use mrmap::gaussian::score_identity_check;
use mrmap::{Result, RngStream};

fn main() -> Result<()> {
    let draws = 1_000_000;
    println!("{:>6} {:>10} {:>10} {:>12} {:>10}", "theta", "lhs", "rhs", "mc lhs", "z-score");
    for (i, theta) in [0.5, 1.0, 2.0].into_iter().enumerate() {
        let s = score_identity_check(theta, draws, &mut RngStream::new(1, i as u64))?;
        println!(
            "{theta:>6} {:>10.5} {:>10.5} {:>12.6} {:>10.2}",
            s.lhs,
            s.rhs,
            s.mc_lhs,
            (s.mc_lhs - s.lhs) / s.mc_std_error
        );
    }
    Ok(())
}
