//! CSV ingestion and emission, output hashing.

use std::fs;
use std::path::{Path, PathBuf};

use pmim::SeriesMatrix;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Fails with a usage error when an input path does not exist, so a missing
/// file is distinguishable from a malformed one.
pub fn require_file(path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("input file not found: {}", path.display())))
    }
}

/// Reads a numeric CSV (rows = samples). A first row that does not parse as
/// numbers is taken as the header of variable names.
pub fn read_series(path: &Path) -> CliResult<SeriesMatrix> {
    require_file(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut names: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(i as u64 + 1, |p| p.line());
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(values) => rows.push(values),
            Err(_) if i == 0 => names = Some(record.iter().map(str::to_owned).collect()),
            Err(_) => {
                let bad = record.iter().find(|f| f.parse::<f64>().is_err()).unwrap_or("");
                return Err(CliError::Data(format!(
                    "{}: line {line}: cannot parse '{bad}' as a number",
                    path.display()
                )));
            }
        }
    }
    if rows.is_empty() {
        return Err(CliError::Data(format!("{}: no data rows", path.display())));
    }
    let located = |e: pmim::PmimError| CliError::Data(format!("{}: {e}", path.display()));
    let series = SeriesMatrix::from_rows(&rows).map_err(located)?;
    match names {
        Some(names) => SeriesMatrix::with_names(series.data().clone(), names).map_err(located),
        None => Ok(series),
    }
}

/// Fixed-width float formatting with 17 significant digits; parses back to
/// the identical `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn series_to_csv(series: &SeriesMatrix) -> String {
    let mut out = series.names().join(",");
    out.push('\n');
    let data = series.data();
    for r in 0..data.nrows() {
        let row: Vec<String> = (0..data.ncols()).map(|c| fmt_f64(data[(r, c)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

/// Writes a file into the output directory and returns its path.
pub fn write_output(dir: &Path, name: &str, contents: &str) -> CliResult<PathBuf> {
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}
