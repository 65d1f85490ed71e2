//! CSV input and output. Floats are written with 17 significant digits and
//! files appear only after they are complete (write to a temporary sibling,
//! then rename).

use std::fs;
use std::path::{Path, PathBuf};

use crate::{Error, Result};

/// Fixed-width scientific formatting with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

/// A CSV table held in memory until written.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Write to `path` through a temporary file in the same directory.
    pub fn write_atomic(&self, path: &Path) -> Result<()> {
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
        let result = self.write_plain(&tmp).and_then(|()| {
            fs::rename(&tmp, path).map_err(|source| Error::Io { path: path.to_path_buf(), source })
        });
        if result.is_err() {
            let _ = fs::remove_file(&tmp);
        }
        result
    }

    fn write_plain(&self, path: &Path) -> Result<()> {
        let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush().map_err(|source| Error::Io { path: path.to_path_buf(), source })
    }
}

/// Numeric matrix read from a CSV file; a non-numeric first row is a header.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub path: PathBuf,
    pub cols: usize,
    pub rows: Vec<Vec<f64>>,
}

impl Matrix {
    pub fn flat(&self) -> Vec<f64> {
        self.rows.iter().flatten().copied().collect()
    }

    /// Require exactly `d` columns.
    pub fn expect_cols(&self, d: usize) -> Result<()> {
        if self.cols == d {
            Ok(())
        } else {
            Err(Error::Input { path: self.path.clone(), msg: format!("expected {d} columns, found {}", self.cols) })
        }
    }
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let input = |msg: String| Error::Input { path: path.to_path_buf(), msg };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| Error::Csv { path: path.to_path_buf(), source })?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|source| Error::Csv { path: path.to_path_buf(), source })?;
        let parsed: std::result::Result<Vec<f64>, usize> =
            rec.iter().enumerate().map(|(j, f)| f.parse::<f64>().map_err(|_| j)).collect();
        match parsed {
            Ok(r) => rows.push(r),
            Err(_) if i == 0 => continue,
            Err(j) => {
                return Err(input(format!("row {}, column {}: not a number: {:?}", i + 1, j + 1, &rec[j])));
            }
        }
    }
    let cols = rows.first().map(Vec::len).ok_or_else(|| input("no data rows".into()))?;
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
        return Err(input(format!("data row {} has {} columns, expected {cols}", i + 1, r.len())));
    }
    if let Some(i) = rows.iter().position(|r| r.iter().any(|x| !x.is_finite())) {
        return Err(input(format!("data row {} contains a non-finite value", i + 1)));
    }
    Ok(Matrix { path: path.to_path_buf(), cols, rows })
}
