//! Scalar-variance estimators across sample sizes and seeds.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ensure_dir, invalid, CommandConfig, CSV_SCHEMA_VERSION};
use crate::error::Result;
use crate::gaussian::{consistency_study, summarize_consistency};
use crate::io::table::{num, write_csv};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Gauss1dConfig {
    pub theta_true: f64,
    pub sigma: f64,
    pub ns: Vec<usize>,
    pub seeds: usize,
    pub seed: u64,
}

impl Default for Gauss1dConfig {
    fn default() -> Self {
        Self {
            theta_true: 2.0,
            sigma: 0.5,
            ns: vec![100, 1_000, 10_000, 100_000],
            seeds: 50,
            seed: 0,
        }
    }
}

impl CommandConfig for Gauss1dConfig {
    const SEED_PATH: &'static str = "seed";

    fn validate(&self) -> Result<()> {
        if !(self.theta_true > 0.0 && self.sigma > 0.0) {
            return Err(invalid("theta_true and sigma must be positive"));
        }
        if self.ns.is_empty() || self.ns.iter().any(|&n| n == 0) {
            return Err(invalid("ns must list positive sample sizes"));
        }
        if self.seeds == 0 {
            return Err(invalid("seeds must be at least 1"));
        }
        Ok(())
    }
}

/// Averages over seeds for one sample size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gauss1dCell {
    pub n: usize,
    pub mean_theta_star: f64,
    pub mean_theta_hat: f64,
    pub mean_theta_tilde: f64,
    pub mean_abs_error_hat: f64,
    pub mean_abs_error_tilde: f64,
    pub negative_theta_hat: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gauss1dSummary {
    pub csv_schema_version: u32,
    pub theta_true: f64,
    pub sigma: f64,
    pub seeds: usize,
    pub cells: Vec<Gauss1dCell>,
    /// Log-log slope of the mean absolute error against n, when two or more sizes ran.
    pub hat_slope: Option<f64>,
    pub tilde_slope: Option<f64>,
}

/// Writes `gauss1d.csv` with columns
/// `n, seed, theta_star, theta_hat, theta_hat_negative, theta_tilde`.
pub fn run(config: &Gauss1dConfig, out: &Path) -> Result<Gauss1dSummary> {
    ensure_dir(out)?;
    let rows = consistency_study(config.theta_true, config.sigma, &config.ns, config.seeds, config.seed)?;
    write_csv(
        &out.join("gauss1d.csv"),
        &["n", "seed", "theta_star", "theta_hat", "theta_hat_negative", "theta_tilde"],
        rows.iter().map(|r| {
            vec![
                r.n.to_string(),
                r.seed.to_string(),
                num(r.theta_star),
                num(r.theta_hat),
                r.theta_hat_negative.to_string(),
                num(r.theta_tilde),
            ]
        }),
    )?;

    let mut ns = config.ns.clone();
    ns.sort_unstable();
    ns.dedup();
    let cells = ns
        .iter()
        .map(|&n| {
            let sel: Vec<_> = rows.iter().filter(|r| r.n == n).collect();
            let k = sel.len() as f64;
            let mean = |f: &dyn Fn(&crate::gaussian::ConsistencyRow) -> f64| sel.iter().map(|r| f(r)).sum::<f64>() / k;
            Gauss1dCell {
                n,
                mean_theta_star: mean(&|r| r.theta_star),
                mean_theta_hat: mean(&|r| r.theta_hat),
                mean_theta_tilde: mean(&|r| r.theta_tilde),
                mean_abs_error_hat: mean(&|r| (r.theta_hat - config.theta_true).abs()),
                mean_abs_error_tilde: mean(&|r| (r.theta_tilde - config.theta_true).abs()),
                negative_theta_hat: sel.iter().filter(|r| r.theta_hat_negative).count(),
            }
        })
        .collect();
    let (hat_slope, tilde_slope) = if ns.len() >= 2 {
        let s = summarize_consistency(config.theta_true, &rows)?;
        (Some(s.hat_slope), Some(s.tilde_slope))
    } else {
        (None, None)
    };
    Ok(Gauss1dSummary {
        csv_schema_version: CSV_SCHEMA_VERSION,
        theta_true: config.theta_true,
        sigma: config.sigma,
        seeds: config.seeds,
        cells,
        hat_slope,
        tilde_slope,
    })
}
