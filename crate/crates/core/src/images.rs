//! Procedural grayscale image corpus: bars, discs and linear gradients.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::samplers::RngStream;

/// Shape family of a generated image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Bar,
    Disc,
    Gradient,
}

fn uniform(rng: &mut RngStream, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.uniform()
}

/// Renders one `width × height` image, row-major, intensities in `[0, 1]`.
pub fn render(shape: Shape, width: usize, height: usize, rng: &mut RngStream) -> Vec<f64> {
    let (w, h) = (width as f64, height as f64);
    let background = uniform(rng, 0.0, 0.2);
    let intensity = uniform(rng, 0.5, 1.0);
    let mut pixels = vec![background; width * height];
    match shape {
        Shape::Bar => {
            let vertical = rng.below(2) == 0;
            let extent = if vertical { w } else { h };
            let thickness = uniform(rng, 1.0, extent / 3.0);
            let center = uniform(rng, 0.0, extent);
            for y in 0..height {
                for x in 0..width {
                    let c = if vertical { x } else { y } as f64 + 0.5;
                    if (c - center).abs() <= thickness / 2.0 {
                        pixels[y * width + x] = intensity;
                    }
                }
            }
        }
        Shape::Disc => {
            let radius = uniform(rng, 1.0, w.min(h) / 2.5);
            let cx = uniform(rng, 0.0, w);
            let cy = uniform(rng, 0.0, h);
            for y in 0..height {
                for x in 0..width {
                    let dx = x as f64 + 0.5 - cx;
                    let dy = y as f64 + 0.5 - cy;
                    if dx * dx + dy * dy <= radius * radius {
                        pixels[y * width + x] = intensity;
                    }
                }
            }
        }
        Shape::Gradient => {
            let angle = uniform(rng, 0.0, 2.0 * std::f64::consts::PI);
            let (ux, uy) = (angle.cos(), angle.sin());
            let half = 0.5 * (w * ux.abs() + h * uy.abs());
            for y in 0..height {
                for x in 0..width {
                    let t = ((x as f64 + 0.5 - w / 2.0) * ux + (y as f64 + 0.5 - h / 2.0) * uy) / half;
                    pixels[y * width + x] = background + (intensity - background) * 0.5 * (t + 1.0);
                }
            }
        }
    }
    pixels
}

/// `count` images as columns of a `(width·height) × count` matrix. Image `i`
/// draws from `rng.fork(i)`; shapes cycle bar, disc, gradient.
pub fn generate_corpus(count: usize, width: usize, height: usize, rng: &RngStream) -> Result<Matrix> {
    if count == 0 || width == 0 || height == 0 {
        return Err(Error::InvalidArgument("image corpus needs positive count and size".into()));
    }
    let shapes = [Shape::Bar, Shape::Disc, Shape::Gradient];
    let mut out = Matrix::zeros(width * height, count);
    for i in 0..count {
        let mut stream = rng.fork(i as u64);
        let pixels = render(shapes[i % shapes.len()], width, height, &mut stream);
        for (r, v) in pixels.into_iter().enumerate() {
            out.set(r, i, v);
        }
    }
    Ok(out)
}
