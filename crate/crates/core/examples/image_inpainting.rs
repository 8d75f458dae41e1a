//! Learns a potential on synthetic 8×8 images and inpaints held-out images
//! from random pixel masks of increasing density.
//!
//! `cargo run --release --example image_inpainting -- [epochs]`

use mrmap::experiments::images::fraction_errors;
use mrmap::images::generate_corpus;
use mrmap::train::{fit, TrainConfig};
use mrmap::{Result, RngStream};

fn main() -> Result<()> {
    let epochs = std::env::args().nth(1).map_or(10, |e| e.parse().expect("epochs must be an integer"));
    let train = generate_corpus(2000, 8, 8, &RngStream::new(0, 21))?;
    let test = generate_corpus(100, 8, 8, &RngStream::new(0, 22))?;

    let config = TrainConfig {
        epochs,
        sigma: 0.05,
        mask_fraction: 0.3,
        ..TrainConfig::default()
    };
    let result = fit(&train, &config)?;
    let last = result.metrics.last().expect("at least one epoch");
    println!("trained {epochs} epochs: R_e {:.4}, R_c {:.2e}", last.re, last.rc);

    let keep: Vec<usize> = (0..test.cols()).collect();
    for fraction in [0.05, 0.1, 0.2, 0.3, 1.0] {
        let recs = fraction_errors(&result.params, &test, &keep, fraction, 0.05, 10, &RngStream::new(0, 23))?;
        let mean = recs.iter().map(|r| r.relative_error).sum::<f64>() / recs.len() as f64;
        println!("observed {:>5.1}%: mean relative error {mean:.4}", 100.0 * fraction);
    }
    Ok(())
}
