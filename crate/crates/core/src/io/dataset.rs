//! Datasets as CSV (one flattened sample per row) with a JSON sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::json;
use crate::linalg::Matrix;

pub const DATASET_VERSION: u32 = 1;

/// Sidecar metadata stored next to a dataset CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    pub format_version: u32,
    pub kind: String,
    pub dim: usize,
    pub count: usize,
    /// Image shape when samples are images, stored row-major.
    pub width: Option<usize>,
    pub height: Option<usize>,
    pub seed: u64,
}

/// `data.csv` → `data.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Writes the columns of `x` (p×n) as rows and the sidecar metadata.
pub fn save_dataset(csv_path: &Path, x: &Matrix, meta: &DatasetMeta) -> Result<()> {
    if meta.dim != x.rows() || meta.count != x.cols() {
        return Err(Error::InvalidArgument("dataset metadata does not match the data".into()));
    }
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(csv_path)?;
    writer.write_record((0..x.rows()).map(|i| format!("x{i}")))?;
    for j in 0..x.cols() {
        writer.write_record(x.column(j).iter().map(|v| v.to_string()))?;
    }
    writer.flush()?;
    fs::write(sidecar_path(csv_path), json::to_string(meta)?)?;
    Ok(())
}

/// Reads a dataset written by [`save_dataset`] and checks it against its sidecar.
pub fn load_dataset(csv_path: &Path) -> Result<(Matrix, DatasetMeta)> {
    let corrupt = |detail: String| Error::Corrupt {
        path: csv_path.to_path_buf(),
        detail,
    };
    let meta_text = fs::read_to_string(sidecar_path(csv_path))?;
    let meta: DatasetMeta = serde_json::from_str(&meta_text).map_err(|e| corrupt(format!("sidecar: {e}")))?;
    if meta.format_version != DATASET_VERSION {
        return Err(Error::Version {
            found: meta.format_version,
            expected: DATASET_VERSION,
        });
    }
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(csv_path)?;
    let width = reader.headers()?.len();
    if width != meta.dim {
        return Err(corrupt(format!("header has {width} columns, metadata says {}", meta.dim)));
    }
    let mut x = Matrix::zeros(meta.dim, meta.count);
    let mut rows = 0;
    for record in reader.records() {
        let record = record?;
        if rows >= meta.count {
            return Err(corrupt(format!("more than {} rows", meta.count)));
        }
        for (i, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| corrupt(format!("row {rows}: {field:?} is not a number")))?;
            if !v.is_finite() {
                return Err(corrupt(format!("row {rows}: non-finite value")));
            }
            x.set(i, rows, v);
        }
        rows += 1;
    }
    if rows != meta.count {
        return Err(corrupt(format!("found {rows} rows, metadata says {}", meta.count)));
    }
    Ok((x, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let x = Matrix::from_rows(&[&[0.1, 1.0 / 3.0, -2.5], &[1e-300, 7.0, -0.0]]).unwrap();
        let meta = DatasetMeta {
            format_version: DATASET_VERSION,
            kind: "test".into(),
            dim: 2,
            count: 3,
            width: None,
            height: None,
            seed: 1,
        };
        save_dataset(&path, &x, &meta).unwrap();
        let (y, m) = load_dataset(&path).unwrap();
        assert_eq!(m, meta);
        for (a, b) in x.as_slice().iter().zip(y.as_slice()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x0,x1\n"));
    }
}
