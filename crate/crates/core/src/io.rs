//! File plumbing: atomic writes, full-precision CSV matrix exchange, and
//! reproducible timestamps.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Render with 17 significant digits, enough for exact f64 round-trips.
pub fn fmt_g17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write a file atomically: the bytes land in a sibling temp file first and
/// are renamed into place, so readers never observe a partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(".tmp");
    let tmp = match dir {
        Some(d) => d.join(&tmp_name),
        None => tmp_name.clone().into(),
    };
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Matrix to CSV, one row per line, 17-significant-digit decimals, no header.
pub fn write_matrix_csv(path: &Path, data: &Matrix) -> Result<()> {
    let mut text = String::with_capacity(data.len() * 24);
    for row in data.rows() {
        let mut first = true;
        for &x in row {
            if !first {
                text.push(',');
            }
            text.push_str(&fmt_g17(x));
            first = false;
        }
        text.push('\n');
    }
    atomic_write(path, text.as_bytes())
}

/// Read a headerless numeric CSV into a matrix. Ragged or non-numeric rows
/// are rejected with their location.
pub fn read_matrix_csv(path: &Path) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .from_path(path)?;
    let mut values = Vec::<f64>::new();
    let mut cols = 0usize;
    let mut rows = 0usize;
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        if rows == 0 {
            cols = record.len();
        }
        for (col, field) in record.iter().enumerate() {
            let x: f64 = field.trim().parse().map_err(|_| {
                Error::MalformedData(format!(
                    "{}: row {}, column {}: not a number: {:?}",
                    path.display(),
                    line + 1,
                    col + 1,
                    field
                ))
            })?;
            values.push(x);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::MalformedData(format!("{}: no rows", path.display())));
    }
    Array2::from_shape_vec((rows, cols), values)
        .map_err(|e| Error::MalformedData(format!("{}: {e}", path.display())))
}

/// Reproducible creation stamp: honors SOURCE_DATE_EPOCH when set, otherwise
/// pins the Unix epoch so identical runs produce identical bytes.
pub fn created_stamp() -> String {
    let secs = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.parse::<i64>().ok())
        .unwrap_or(0);
    epoch_to_iso8601(secs)
}

/// Convert Unix seconds to "YYYY-MM-DDTHH:MM:SSZ" (proleptic Gregorian).
pub fn epoch_to_iso8601(secs: i64) -> String {
    let days = secs.div_euclid(86_400);
    let rem = secs.rem_euclid(86_400);
    let (h, min, s) = (rem / 3600, (rem % 3600) / 60, rem % 60);

    // Civil-from-days: era-based calendar conversion.
    let z = days + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z.rem_euclid(146_097);
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let day = doy - (153 * mp + 2) / 5 + 1;
    let month = if mp < 10 { mp + 3 } else { mp - 9 };
    let year = if month <= 2 { y + 1 } else { y };

    format!("{year:04}-{month:02}-{day:02}T{h:02}:{min:02}:{s:02}Z")
}
