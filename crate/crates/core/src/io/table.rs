//! CSV tables with a fixed column order and LF line endings.

use std::path::Path;

use crate::error::Result;

/// Writes `header` followed by `rows`. Floats should be formatted by the
/// caller; [`num`] gives the shortest text that parses back exactly.
pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Shortest round-trip decimal form of a float.
pub fn num(v: f64) -> String {
    v.to_string()
}
