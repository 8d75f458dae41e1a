//! Langevin sampling of an ill-conditioned Gaussian against exact samples.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ensure_dir, invalid, CommandConfig, CSV_SCHEMA_VERSION};
use crate::error::Result;
use crate::io::svg::{scatter_svg, Panel, Point};
use crate::io::table::{num, write_csv};
use crate::linalg::Matrix;
use crate::samplers::{
    langevin_run_snapshots, sample_gaussian_precision, slow_direction, slow_variance_ratios, RngStream,
};

const TARGET_STREAM: u64 = 1;
const CHAIN_STREAM: u64 = 2;
const RATIO_STREAM: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LangevinConfig {
    /// Precision matrix `Θ_T` of the target `N(0, Θ_T⁻¹)`, as rows.
    pub theta: Vec<Vec<f64>>,
    pub delta: f64,
    /// Iteration counts at which chain states are recorded.
    pub snapshots: Vec<usize>,
    /// Chains (and exact samples) drawn for the scatter plots.
    pub chains: usize,
    /// Chains averaged for the slow-direction variance ratio.
    pub ratio_chains: usize,
    pub seed: u64,
}

impl Default for LangevinConfig {
    fn default() -> Self {
        Self {
            theta: vec![vec![1000.0, -1.0], vec![-1.0, 2.0]],
            delta: 0.044,
            snapshots: vec![1000, 2000, 3000, 4000],
            chains: 500,
            ratio_chains: 20,
            seed: 0,
        }
    }
}

impl LangevinConfig {
    pub fn theta_matrix(&self) -> Result<Matrix> {
        let rows: Vec<&[f64]> = self.theta.iter().map(Vec::as_slice).collect();
        Matrix::from_rows(&rows)
    }
}

impl CommandConfig for LangevinConfig {
    const SEED_PATH: &'static str = "seed";

    fn validate(&self) -> Result<()> {
        let theta = self.theta_matrix()?;
        if theta.rows() == 0 || theta.rows() != theta.cols() || !theta.is_symmetric(1e-12) {
            return Err(invalid("theta must be a nonempty symmetric square matrix"));
        }
        theta.cholesky()?;
        if !(self.delta > 0.0) {
            return Err(invalid("delta must be positive"));
        }
        if self.chains == 0 {
            return Err(invalid("chains must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnapshotSummary {
    pub iteration: usize,
    /// Across-chain covariance of the snapshot states, row-major.
    pub covariance: Vec<f64>,
    /// Seed-averaged slow-direction variance divided by its target, if defined.
    pub slow_variance_ratio: Option<f64>,
    pub svg: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LangevinSummary {
    pub csv_schema_version: u32,
    pub slow_eigenvalue: f64,
    pub slow_direction: Vec<f64>,
    pub target_covariance: Vec<f64>,
    pub snapshots: Vec<SnapshotSummary>,
}

/// Across-chain sample covariance (columns are chains).
pub fn sample_covariance(x: &Matrix) -> Vec<f64> {
    let (p, n) = (x.rows(), x.cols());
    let means: Vec<f64> = (0..p).map(|i| x.row(i).iter().sum::<f64>() / n as f64).collect();
    let denom = (n as f64 - 1.0).max(1.0);
    let mut cov = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..p {
            let s: f64 = (0..n).map(|c| (x.get(i, c) - means[i]) * (x.get(j, c) - means[j])).sum();
            cov[i * p + j] = s / denom;
        }
    }
    cov
}

fn plane_point(x: &Matrix, c: usize, color: &str) -> Point {
    Point {
        x: x.get(0, c),
        y: if x.rows() > 1 { x.get(1, c) } else { 0.0 },
        color: color.to_string(),
    }
}

/// Writes `langevin.csv` with columns `iteration, chain, source, x0.., slow_variance_ratio`
/// (target rows leave `iteration` and the ratio empty) and one SVG per snapshot.
pub fn run(config: &LangevinConfig, out: &Path) -> Result<LangevinSummary> {
    ensure_dir(out)?;
    let theta = config.theta_matrix()?;
    let p = theta.rows();
    let mut snapshots = config.snapshots.clone();
    snapshots.sort_unstable();
    snapshots.dedup();
    let n_iters = snapshots.last().copied().unwrap_or(0);

    let mut target_rng = RngStream::new(config.seed, TARGET_STREAM);
    let target = sample_gaussian_precision(&theta, config.chains, &mut target_rng)?;
    let init = Matrix::zeros(p, config.chains);
    let run = langevin_run_snapshots(
        &theta,
        config.delta,
        n_iters,
        &RngStream::new(config.seed, CHAIN_STREAM),
        &init,
        &snapshots,
    )?;
    let ratio_points: Vec<usize> = snapshots.iter().copied().filter(|&k| k >= 2).collect();
    let ratios = if config.ratio_chains > 0 && !ratio_points.is_empty() {
        slow_variance_ratios(
            &theta,
            config.delta,
            &ratio_points,
            config.ratio_chains,
            &RngStream::new(config.seed, RATIO_STREAM),
        )?
    } else {
        Vec::new()
    };
    let ratio_at = |k: usize| ratio_points.iter().position(|&r| r == k).and_then(|i| ratios.get(i).copied());

    let mut header: Vec<String> = vec!["iteration".into(), "chain".into(), "source".into()];
    header.extend((0..p).map(|i| format!("x{i}")));
    header.push("slow_variance_ratio".into());
    let mut rows: Vec<Vec<String>> = Vec::new();
    for c in 0..config.chains {
        let mut row = vec![String::new(), c.to_string(), "target".into()];
        row.extend((0..p).map(|i| num(target.get(i, c))));
        row.push(String::new());
        rows.push(row);
    }
    let mut summaries = Vec::new();
    for (k, states) in &run.snapshots {
        let ratio = ratio_at(*k);
        for c in 0..config.chains {
            let mut row = vec![k.to_string(), c.to_string(), "langevin".into()];
            row.extend((0..p).map(|i| num(states.get(i, c))));
            row.push(ratio.map(num).unwrap_or_default());
            rows.push(row);
        }
        let mut points: Vec<Point> = (0..config.chains).map(|c| plane_point(&target, c, "#d62728")).collect();
        points.extend((0..config.chains).map(|c| plane_point(states, c, "#1f77b4")));
        let svg_name = format!("langevin_{k}.svg");
        fs::write(
            out.join(&svg_name),
            scatter_svg(&[Panel {
                title: format!("{k} iterations: target (red), Langevin (blue)"),
                points,
            }]),
        )?;
        summaries.push(SnapshotSummary {
            iteration: *k,
            covariance: sample_covariance(states),
            slow_variance_ratio: ratio,
            svg: svg_name,
        });
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&out.join("langevin.csv"), &header_refs, rows)?;

    let (lambda, v) = slow_direction(&theta)?;
    Ok(LangevinSummary {
        csv_schema_version: CSV_SCHEMA_VERSION,
        slow_eigenvalue: lambda,
        slow_direction: v.into_inner(),
        target_covariance: theta.inverse_spd()?.as_slice().to_vec(),
        snapshots: summaries,
    })
}
