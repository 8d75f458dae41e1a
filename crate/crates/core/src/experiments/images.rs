//! Synthetic image corpus, generic training on a dataset file, and masked
//! image recovery across observed-pixel fractions.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ensure_dir, invalid, write_metrics, CommandConfig, CSV_SCHEMA_VERSION};
use crate::error::{check_len, Result};
use crate::flow::run_flow;
use crate::images::generate_corpus;
use crate::io::checkpoint::{load_checkpoint, save_checkpoint};
use crate::io::dataset::{load_dataset, save_dataset, DatasetMeta, DATASET_VERSION};
use crate::io::pgm::write_pgm;
use crate::io::table::{num, write_csv};
use crate::linalg::{norm, Matrix};
use crate::operators::{make_latent, sample_mask, ForwardOperator};
use crate::potential::PotentialParams;
use crate::samplers::RngStream;
use crate::train::{fit, TrainConfig};

const TRAIN_IMAGES_STREAM: u64 = 21;
const TEST_IMAGES_STREAM: u64 = 22;
const RECOVER_STREAM: u64 = 23;

fn check_file(path: &Path, what: &str) -> Result<()> {
    if path.as_os_str().is_empty() {
        return Err(invalid(format!("{what} path is required")));
    }
    if !path.is_file() {
        return Err(invalid(format!("{what} {} does not exist", path.display())));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerateConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub width: usize,
    pub height: usize,
    /// Number of test images also written as PGM previews.
    pub previews: usize,
    pub seed: u64,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            n_train: 2000,
            n_test: 500,
            width: 8,
            height: 8,
            previews: 8,
            seed: 0,
        }
    }
}

impl CommandConfig for GenerateConfig {
    const SEED_PATH: &'static str = "seed";

    fn validate(&self) -> Result<()> {
        if self.n_train == 0 || self.n_test == 0 || self.width == 0 || self.height == 0 {
            return Err(invalid("image counts and sizes must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerateSummary {
    pub train: PathBuf,
    pub test: PathBuf,
    pub dim: usize,
    pub previews: usize,
}

fn image_meta(config: &GenerateConfig, kind: &str, count: usize) -> DatasetMeta {
    DatasetMeta {
        format_version: DATASET_VERSION,
        kind: kind.to_string(),
        dim: config.width * config.height,
        count,
        width: Some(config.width),
        height: Some(config.height),
        seed: config.seed,
    }
}

/// Writes `images_train.csv`, `images_test.csv` (each with a JSON sidecar) and previews.
pub fn run_generate(config: &GenerateConfig, out: &Path) -> Result<GenerateSummary> {
    ensure_dir(out)?;
    let (w, h) = (config.width, config.height);
    let train = generate_corpus(config.n_train, w, h, &RngStream::new(config.seed, TRAIN_IMAGES_STREAM))?;
    let test = generate_corpus(config.n_test, w, h, &RngStream::new(config.seed, TEST_IMAGES_STREAM))?;
    let train_path = out.join("images_train.csv");
    let test_path = out.join("images_test.csv");
    save_dataset(&train_path, &train, &image_meta(config, "images_train", config.n_train))?;
    save_dataset(&test_path, &test, &image_meta(config, "images_test", config.n_test))?;
    let previews = config.previews.min(config.n_test);
    for j in 0..previews {
        write_pgm(&out.join(format!("image_{j}.pgm")), w, h, &test.column(j))?;
    }
    Ok(GenerateSummary {
        train: train_path,
        test: test_path,
        dim: w * h,
        previews,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainCommandConfig {
    pub dataset: PathBuf,
    pub train: TrainConfig,
}

impl Default for TrainCommandConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::new(),
            train: TrainConfig {
                sigma: 0.05,
                mask_fraction: 0.3,
                ..TrainConfig::default()
            },
        }
    }
}

impl CommandConfig for TrainCommandConfig {
    const SEED_PATH: &'static str = "train.seed";

    fn validate(&self) -> Result<()> {
        check_file(&self.dataset, "dataset")?;
        self.train.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub samples: usize,
    pub dim: usize,
    pub epochs: usize,
    pub first_epoch_total: Option<f64>,
    pub final_total: Option<f64>,
    pub final_rc: Option<f64>,
}

/// Trains on a dataset file; writes `checkpoint.json` and `metrics.csv`.
pub fn run_train(config: &TrainCommandConfig, out: &Path) -> Result<TrainSummary> {
    ensure_dir(out)?;
    let (x, meta) = load_dataset(&config.dataset)?;
    let result = fit(&x, &config.train)?;
    let checkpoint = out.join("checkpoint.json");
    save_checkpoint(&checkpoint, &result.params, &config.train, &result.metrics)?;
    write_metrics(&out.join("metrics.csv"), &result.metrics)?;
    Ok(TrainSummary {
        checkpoint,
        samples: meta.count,
        dim: meta.dim,
        epochs: config.train.epochs,
        first_epoch_total: result.metrics.first().map(|m| m.total),
        final_total: result.metrics.last().map(|m| m.total),
        final_rc: result.metrics.last().map(|m| m.rc),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecoverConfig {
    pub checkpoint: PathBuf,
    pub dataset: PathBuf,
    pub fractions: Vec<f64>,
    pub masks_per_image: usize,
    /// Noise level of the latent data; the checkpoint's `sigma` when absent.
    pub sigma: Option<f64>,
    /// Use only the first `max_images` images when set.
    pub max_images: Option<usize>,
    /// Images written as PGM triples (truth, observed, recovered) per fraction.
    pub pgm_images: usize,
    pub seed: u64,
}

impl Default for RecoverConfig {
    fn default() -> Self {
        Self {
            checkpoint: PathBuf::new(),
            dataset: PathBuf::new(),
            fractions: vec![0.05, 0.1, 0.2, 0.3],
            masks_per_image: 10,
            sigma: None,
            max_images: None,
            pgm_images: 4,
            seed: 0,
        }
    }
}

impl CommandConfig for RecoverConfig {
    const SEED_PATH: &'static str = "seed";

    fn validate(&self) -> Result<()> {
        check_file(&self.checkpoint, "checkpoint")?;
        check_file(&self.dataset, "dataset")?;
        if self.fractions.is_empty() || self.fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
            return Err(invalid("fractions must lie in (0, 1]"));
        }
        if self.masks_per_image == 0 {
            return Err(invalid("masks_per_image must be at least 1"));
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0) {
                return Err(invalid("sigma must be positive"));
            }
        }
        Ok(())
    }
}

/// Relative error statistics for one observed-pixel fraction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FractionSummary {
    pub fraction: f64,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoverSummary {
    pub csv_schema_version: u32,
    pub sigma: f64,
    pub images: usize,
    pub skipped_zero_images: Vec<usize>,
    pub fractions: Vec<FractionSummary>,
}

/// One masked reconstruction and its relative error `‖x̂ − x‖² / ‖x‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedRecovery {
    pub observed: Vec<f64>,
    pub x_hat: Vec<f64>,
    pub relative_error: f64,
}

/// Reconstructs `x` from a random mask keeping `fraction` of its entries.
pub fn recover_masked(
    params: &PotentialParams,
    x: &[f64],
    fraction: f64,
    sigma: f64,
    rng: &mut RngStream,
) -> Result<MaskedRecovery> {
    let op: ForwardOperator = sample_mask(x.len(), fraction, rng)?;
    let datum = make_latent(x, op, sigma, rng)?;
    let traj = run_flow(params, &datum)?;
    let x_hat = params.k.matvec(traj.terminal())?;
    let err: f64 = x_hat.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
    let xx = norm(x).powi(2);
    Ok(MaskedRecovery {
        observed: datum.operator.apply_adjoint(&datum.d)?.into_inner(),
        x_hat,
        relative_error: err / xx,
    })
}

/// Relative errors for every `(image, mask)` pair at one fraction, in image-major order.
/// Mask `m` of image `i` draws from `rng.fork(i · masks + m)`.
pub fn fraction_errors(
    params: &PotentialParams,
    images: &Matrix,
    keep: &[usize],
    fraction: f64,
    sigma: f64,
    masks: usize,
    rng: &RngStream,
) -> Result<Vec<MaskedRecovery>> {
    let pairs: Vec<(usize, usize)> = keep.iter().flat_map(|&i| (0..masks).map(move |m| (i, m))).collect();
    pairs
        .par_iter()
        .map(|&(i, m)| {
            let mut stream = rng.fork((i * masks + m) as u64);
            recover_masked(params, &images.column(i), fraction, sigma, &mut stream)
        })
        .collect()
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// Writes `recover.csv` (`fraction, image, mask, relative_error`),
/// `recover_summary.csv` (`fraction, mean, std, count`) and PGM triples.
pub fn run_recover(config: &RecoverConfig, out: &Path) -> Result<RecoverSummary> {
    ensure_dir(out)?;
    let checkpoint = load_checkpoint(&config.checkpoint)?;
    let params = checkpoint.params;
    let (images, meta) = load_dataset(&config.dataset)?;
    check_len("dataset dimension vs checkpoint", params.p(), meta.dim)?;
    let sigma = config.sigma.unwrap_or(params.hyper.sigma);
    let count = config.max_images.map_or(images.cols(), |m| m.min(images.cols()));

    let mut skipped = Vec::new();
    let mut keep = Vec::new();
    for i in 0..count {
        if norm(&images.column(i)) == 0.0 {
            eprintln!("warning: image {i} is all zero; relative error undefined, skipped");
            skipped.push(i);
        } else {
            keep.push(i);
        }
    }

    let base = RngStream::new(config.seed, RECOVER_STREAM);
    let mut detail_rows = Vec::new();
    let mut summaries = Vec::new();
    let shape = meta.width.zip(meta.height).filter(|(w, h)| w * h == meta.dim);
    for (fi, &fraction) in config.fractions.iter().enumerate() {
        let recs = fraction_errors(
            &params,
            &images,
            &keep,
            fraction,
            sigma,
            config.masks_per_image,
            &base.fork(fi as u64),
        )?;
        for (k, rec) in recs.iter().enumerate() {
            let (i, m) = (keep[k / config.masks_per_image], k % config.masks_per_image);
            detail_rows.push(vec![num(fraction), i.to_string(), m.to_string(), num(rec.relative_error)]);
        }
        let errors: Vec<f64> = recs.iter().map(|r| r.relative_error).collect();
        let (mean, std) = if errors.is_empty() { (f64::NAN, f64::NAN) } else { mean_std(&errors) };
        summaries.push(FractionSummary {
            fraction,
            mean,
            std,
            count: errors.len(),
        });
        if let Some((w, h)) = shape {
            let pct = (fraction * 100.0).round() as u32;
            for (slot, &i) in keep.iter().take(config.pgm_images).enumerate() {
                let rec = &recs[slot * config.masks_per_image];
                write_pgm(&out.join(format!("recover_{i}_truth.pgm")), w, h, &images.column(i))?;
                write_pgm(&out.join(format!("recover_{i}_p{pct}_observed.pgm")), w, h, &rec.observed)?;
                write_pgm(&out.join(format!("recover_{i}_p{pct}_recovered.pgm")), w, h, &rec.x_hat)?;
            }
        }
    }
    write_csv(&out.join("recover.csv"), &["fraction", "image", "mask", "relative_error"], detail_rows)?;
    write_csv(
        &out.join("recover_summary.csv"),
        &["fraction", "mean", "std", "count"],
        summaries
            .iter()
            .map(|s| vec![num(s.fraction), num(s.mean), num(s.std), s.count.to_string()]),
    )?;
    Ok(RecoverSummary {
        csv_schema_version: CSV_SCHEMA_VERSION,
        sigma,
        images: keep.len(),
        skipped_zero_images: skipped,
        fractions: summaries,
    })
}
