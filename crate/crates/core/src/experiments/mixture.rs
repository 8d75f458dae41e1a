//! Potential recovery on a planar Gaussian mixture.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ensure_dir, invalid, write_metrics, CommandConfig, CSV_SCHEMA_VERSION};
use crate::error::Result;
use crate::flow::run_flow;
use crate::io::checkpoint::save_checkpoint;
use crate::io::svg::{ramp_colors, scatter_svg, Panel, Point};
use crate::io::table::{num, write_csv};
use crate::linalg::Matrix;
use crate::operators::make_latent;
use crate::potential::PotentialParams;
use crate::samplers::{mixture_log_density, sample_mixture_labeled, MixtureSpec, RngStream};
use crate::train::{draw_operator, fit, ModelConfig, TrainConfig};

const TRAIN_DATA_STREAM: u64 = 11;
const VAL_DATA_STREAM: u64 = 12;
const TRAIN_EVAL_STREAM: u64 = 13;
const VAL_EVAL_STREAM: u64 = 14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MixtureConfig {
    pub n_train: usize,
    pub n_val: usize,
    pub components: usize,
    pub radius: f64,
    pub train: TrainConfig,
}

/// Training defaults for the mixture task. A large `gamma` and small batches
/// keep the consistency residual low enough for the flow to act as a MAP solver.
pub fn mixture_train_defaults() -> TrainConfig {
    TrainConfig {
        batch_size: 8,
        gamma: 100.0,
        sigma: 1.5,
        mask_fraction: 1.0,
        model: ModelConfig::default(),
        ..TrainConfig::default()
    }
}

impl Default for MixtureConfig {
    fn default() -> Self {
        Self {
            n_train: 600,
            n_val: 1000,
            components: 6,
            radius: 8.0,
            train: mixture_train_defaults(),
        }
    }
}

impl CommandConfig for MixtureConfig {
    const SEED_PATH: &'static str = "train.seed";

    fn validate(&self) -> Result<()> {
        if self.components == 0 || !(self.radius >= 0.0) {
            return Err(invalid("mixture needs at least one component and a nonnegative radius"));
        }
        if self.n_val == 0 || self.n_train < self.train.batch_size {
            return Err(invalid("n_val must be positive and n_train at least batch_size"));
        }
        self.train.validate()
    }
}

/// One reconstructed point.
#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    pub x: Vec<f64>,
    /// Mixture component that generated `x`.
    pub component: usize,
    /// Mean nearest to `x`.
    pub nearest_component: usize,
    /// `Pᵀd`, the latent data in signal coordinates.
    pub d_lifted: Vec<f64>,
    pub x_hat: Vec<f64>,
    pub phi_true: f64,
    pub phi_model: f64,
    pub recovered_component: usize,
}

/// Reconstructs every column of `x` from one fresh `(P, ε)` draw each.
pub fn recover_points(
    params: &PotentialParams,
    spec: &MixtureSpec,
    x: &Matrix,
    labels: &[usize],
    config: &TrainConfig,
    rng: &RngStream,
) -> Result<Vec<Recovery>> {
    (0..x.cols())
        .into_par_iter()
        .map(|j| {
            let xj = x.column(j);
            let mut stream = rng.fork(j as u64);
            let op = draw_operator(x.rows(), config.mask_fraction, &mut stream)?;
            let datum = make_latent(&xj, op, config.sigma, &mut stream)?;
            let traj = run_flow(params, &datum)?;
            let x_hat = params.k.matvec(traj.terminal())?;
            Ok(Recovery {
                d_lifted: datum.operator.apply_adjoint(&datum.d)?.into_inner(),
                phi_true: -mixture_log_density(spec, &xj)?,
                phi_model: params.potential_value(&traj.u)?,
                recovered_component: spec.nearest(&x_hat),
                component: labels[j],
                nearest_component: spec.nearest(&xj),
                x: xj,
                x_hat,
            })
        })
        .collect()
}

fn write_recoveries(path: &Path, rec: &[Recovery]) -> Result<()> {
    let p = rec.first().map_or(0, |r| r.x.len());
    let mut header = vec!["index".to_string(), "component".to_string(), "nearest_component".to_string()];
    for prefix in ["x", "d", "xhat"] {
        header.extend((0..p).map(|i| format!("{prefix}{i}")));
    }
    header.extend(["phi_true", "phi_model", "recovered_component"].map(String::from));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(
        path,
        &header_refs,
        rec.iter().enumerate().map(|(j, r)| {
            let mut row = vec![j.to_string(), r.component.to_string(), r.nearest_component.to_string()];
            row.extend(r.x.iter().chain(&r.d_lifted).chain(&r.x_hat).map(|v| num(*v)));
            row.push(num(r.phi_true));
            row.push(num(r.phi_model));
            row.push(r.recovered_component.to_string());
            row
        }),
    )
}

fn triptych(rec: &[Recovery]) -> String {
    let true_colors = ramp_colors(&rec.iter().map(|r| r.phi_true).collect::<Vec<_>>());
    let model_colors = ramp_colors(&rec.iter().map(|r| r.phi_model).collect::<Vec<_>>());
    let panel = |title: &str, pick: &dyn Fn(&Recovery) -> &[f64], colors: &[String]| Panel {
        title: title.to_string(),
        points: rec
            .iter()
            .zip(colors)
            .map(|(r, c)| {
                let v = pick(r);
                Point {
                    x: v[0],
                    y: v.get(1).copied().unwrap_or(0.0),
                    color: c.clone(),
                }
            })
            .collect(),
    };
    scatter_svg(&[
        panel("(a) x", &|r| &r.x, &true_colors),
        panel("(b) d", &|r| &r.d_lifted, &true_colors),
        panel("(c) recovered x", &|r| &r.x_hat, &model_colors),
    ])
}

/// Recovery quality on one point set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SetSummary {
    pub points: usize,
    pub mse: f64,
    pub mse_std_error: f64,
    /// `σ² · p`, the MSE of returning `d` unchanged.
    pub identity_mse: f64,
    /// Share of points whose nearest mean is the same for `x` and `x̂`.
    pub component_preservation: f64,
}

fn summarize(rec: &[Recovery], sigma: f64) -> SetSummary {
    let errs: Vec<f64> = rec
        .iter()
        .map(|r| r.x_hat.iter().zip(&r.x).map(|(a, b)| (a - b) * (a - b)).sum())
        .collect();
    let n = errs.len() as f64;
    let mse = errs.iter().sum::<f64>() / n;
    let var = errs.iter().map(|e| (e - mse) * (e - mse)).sum::<f64>() / (n - 1.0).max(1.0);
    let kept = rec.iter().filter(|r| r.nearest_component == r.recovered_component).count();
    SetSummary {
        points: rec.len(),
        mse,
        mse_std_error: (var / n).sqrt(),
        identity_mse: sigma * sigma * rec.first().map_or(0, |r| r.x.len()) as f64,
        component_preservation: kept as f64 / n,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixtureSummary {
    pub csv_schema_version: u32,
    pub epochs: usize,
    pub first_epoch_total: Option<f64>,
    pub final_total: Option<f64>,
    pub final_rc: Option<f64>,
    pub train: SetSummary,
    pub validation: SetSummary,
}

/// Trains on `n_train` mixture samples and writes `metrics.csv`,
/// `checkpoint.json`, `mixture_{train,val}.csv` and `mixture_{train,val}.svg`.
pub fn run(config: &MixtureConfig, out: &Path) -> Result<MixtureSummary> {
    ensure_dir(out)?;
    let tc = &config.train;
    let spec = MixtureSpec::circle(config.components, config.radius);
    let (x_train, l_train) =
        sample_mixture_labeled(&spec, config.n_train, &mut RngStream::new(tc.seed, TRAIN_DATA_STREAM))?;
    let (x_val, l_val) = sample_mixture_labeled(&spec, config.n_val, &mut RngStream::new(tc.seed, VAL_DATA_STREAM))?;

    let result = fit(&x_train, tc)?;
    write_metrics(&out.join("metrics.csv"), &result.metrics)?;
    save_checkpoint(&out.join("checkpoint.json"), &result.params, tc, &result.metrics)?;

    let rec_train = recover_points(&result.params, &spec, &x_train, &l_train, tc, &RngStream::new(tc.seed, TRAIN_EVAL_STREAM))?;
    let rec_val = recover_points(&result.params, &spec, &x_val, &l_val, tc, &RngStream::new(tc.seed, VAL_EVAL_STREAM))?;
    write_recoveries(&out.join("mixture_train.csv"), &rec_train)?;
    write_recoveries(&out.join("mixture_val.csv"), &rec_val)?;
    fs::write(out.join("mixture_train.svg"), triptych(&rec_train))?;
    fs::write(out.join("mixture_val.svg"), triptych(&rec_val))?;

    Ok(MixtureSummary {
        csv_schema_version: CSV_SCHEMA_VERSION,
        epochs: tc.epochs,
        first_epoch_total: result.metrics.first().map(|m| m.total),
        final_total: result.metrics.last().map(|m| m.total),
        final_rc: result.metrics.last().map(|m| m.rc),
        train: summarize(&rec_train, tc.sigma),
        validation: summarize(&rec_val, tc.sigma),
    })
}
