//! File formats and command-line configuration.

pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod json;
pub mod pgm;
pub mod svg;
pub mod table;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use config::Invocation;
pub use dataset::{load_dataset, save_dataset, DatasetMeta};
