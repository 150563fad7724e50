//! Artifact writers. Every file is written to a temporary sibling and renamed
//! into place, so a failed run never leaves a truncated artifact behind.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use tempfile::NamedTempFile;

use crate::error::{Error, Result};

/// Writes `bytes` to `path` atomically.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Writes a CSV with a header row followed by `rows`.
pub fn write_table<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    write_atomic(path, &bytes)
}

/// Writes an `n x n` cell grid, one CSV row per grid row (`j = 0` first), no
/// header. `cell` returns the field(s) written for one cell index.
pub(crate) fn write_grid_csv(path: &Path, n: usize, cell: impl Fn(usize) -> Vec<String>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    for j in 0..n {
        let mut row = Vec::with_capacity(n);
        for i in 0..n {
            row.extend(cell(j * n + i));
        }
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    write_atomic(path, &bytes)
}

/// Shortest representation that round-trips.
pub fn format_value(v: f64) -> String {
    format!("{v:?}")
}
