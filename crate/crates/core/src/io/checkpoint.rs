//! Versioned JSON checkpoints of trained models.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::io::json;
use crate::potential::PotentialParams;
use crate::train::{EpochMetrics, TrainConfig};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to reproduce a trained model's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub params: PotentialParams,
    pub config: TrainConfig,
    pub metrics: Vec<EpochMetrics>,
}

impl Checkpoint {
    pub fn new(params: PotentialParams, config: TrainConfig, metrics: Vec<EpochMetrics>) -> Self {
        Self {
            format_version: CHECKPOINT_VERSION,
            params,
            config,
            metrics,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        json::to_string(self)
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let corrupt = |detail: String| Error::Corrupt {
            path: origin.to_path_buf(),
            detail,
        };
        let tree: Value = serde_json::from_str(text).map_err(|e| corrupt(e.to_string()))?;
        let found = tree
            .get("format_version")
            .and_then(Value::as_u64)
            .ok_or_else(|| corrupt("missing format_version".into()))?;
        if found != u64::from(CHECKPOINT_VERSION) {
            return Err(Error::Version {
                found: u32::try_from(found).unwrap_or(u32::MAX),
                expected: CHECKPOINT_VERSION,
            });
        }
        let checkpoint: Checkpoint =
            serde_json::from_value(tree).map_err(|e| corrupt(e.to_string()))?;
        checkpoint
            .params
            .validate()
            .map_err(|e| corrupt(format!("invalid parameters: {e}")))?;
        Ok(checkpoint)
    }
}

pub fn save_checkpoint(
    path: &Path,
    params: &PotentialParams,
    config: &TrainConfig,
    metrics: &[EpochMetrics],
) -> Result<()> {
    let checkpoint = Checkpoint::new(params.clone(), *config, metrics.to_vec());
    fs::write(path, checkpoint.to_json()?)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path)?;
    Checkpoint::from_json(&text, path)
}
