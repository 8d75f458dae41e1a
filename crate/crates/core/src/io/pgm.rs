//! ASCII PGM (P2) grayscale images.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{check_len, Error, Result};

pub const PGM_MAXVAL: u32 = 255;

/// Encodes row-major intensities in `[0, 1]` (clamped) as P2 text.
pub fn encode_pgm(width: usize, height: usize, pixels: &[f64]) -> Result<String> {
    check_len("image pixels", width * height, pixels.len())?;
    let mut out = format!("P2\n{width} {height}\n{PGM_MAXVAL}\n");
    for row in pixels.chunks(width.max(1)) {
        let line: Vec<String> = row
            .iter()
            .map(|v| {
                let level = (v.clamp(0.0, 1.0) * f64::from(PGM_MAXVAL)).round() as u32;
                level.to_string()
            })
            .collect();
        writeln!(out, "{}", line.join(" ")).expect("write to string");
    }
    Ok(out)
}

pub fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[f64]) -> Result<()> {
    fs::write(path, encode_pgm(width, height, pixels)?)?;
    Ok(())
}

/// Parses P2 text into `(width, height, intensities in [0, 1])`.
pub fn decode_pgm(text: &str) -> Result<(usize, usize, Vec<f64>)> {
    let bad = |detail: &str| Error::InvalidArgument(format!("malformed PGM: {detail}"));
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    if tokens.next() != Some("P2") {
        return Err(bad("missing P2 magic"));
    }
    let mut next_num = |what: &str| -> Result<u32> {
        tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad(what))
    };
    let width = next_num("width")? as usize;
    let height = next_num("height")? as usize;
    let maxval = next_num("maxval")?;
    if maxval == 0 {
        return Err(bad("maxval is zero"));
    }
    let mut pixels = Vec::with_capacity(width * height);
    for _ in 0..width * height {
        pixels.push(f64::from(next_num("pixel")?) / f64::from(maxval));
    }
    Ok((width, height, pixels))
}
