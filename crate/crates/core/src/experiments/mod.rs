//! Experiment drivers behind the `mrmap` subcommands.
//!
//! Each command resolves its configuration, validates it, writes its files
//! into the output directory and returns a serializable summary that is also
//! stored as `summary.json`. Nothing written depends on wall-clock time.

pub mod gauss1d;
pub mod images;
pub mod langevin;
pub mod mixture;

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::config::Invocation;
use crate::io::json;
use crate::io::table::{num, write_csv};
use crate::train::EpochMetrics;

/// Version of every CSV schema written by the commands.
pub const CSV_SCHEMA_VERSION: u32 = 1;

/// Subcommand names accepted by [`run`].
pub const COMMANDS: [&str; 6] = ["gauss1d", "langevin", "mixture", "gen-images", "train", "recover"];

/// Configuration of one command.
pub trait CommandConfig: Serialize + DeserializeOwned + Default {
    /// Dotted path of the field that `--seed` sets.
    const SEED_PATH: &'static str;

    fn validate(&self) -> Result<()>;
}

/// Resolves and validates a configuration; every failure is a usage error.
pub fn prepare<T: CommandConfig>(inv: &Invocation) -> Result<T> {
    let config: T = inv.resolve(T::SEED_PATH)?;
    config.validate().map_err(|e| match e {
        Error::Usage(m) => Error::Usage(m),
        other => Error::Usage(other.to_string()),
    })?;
    Ok(config)
}

/// Runs the command named in `inv` and returns its summary as JSON text.
pub fn run(inv: &Invocation) -> Result<String> {
    let out = inv.out_dir();
    match inv.command.as_str() {
        "gauss1d" => finish(&out, gauss1d::run(&prepare(inv)?, &out)),
        "langevin" => finish(&out, langevin::run(&prepare(inv)?, &out)),
        "mixture" => finish(&out, mixture::run(&prepare(inv)?, &out)),
        "gen-images" => finish(&out, images::run_generate(&prepare(inv)?, &out)),
        "train" => finish(&out, images::run_train(&prepare(inv)?, &out)),
        "recover" => finish(&out, images::run_recover(&prepare(inv)?, &out)),
        other => Err(Error::Usage(format!(
            "unknown command {other:?}; expected one of {}",
            COMMANDS.join(", ")
        ))),
    }
}

fn finish<S: Serialize>(out: &Path, summary: Result<S>) -> Result<String> {
    let text = json::to_string(&summary?)?;
    fs::write(out.join("summary.json"), &text)?;
    Ok(text)
}

pub(crate) fn ensure_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    Ok(())
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

/// Per-epoch metrics without wall time.
pub fn write_metrics(path: &Path, metrics: &[EpochMetrics]) -> Result<()> {
    write_csv(
        path,
        &["epoch", "re", "rp", "rc", "total", "lr"],
        metrics.iter().map(|m| {
            vec![
                m.epoch.to_string(),
                num(m.re),
                num(m.rp),
                num(m.rc),
                num(m.total),
                num(m.lr),
            ]
        }),
    )
}
