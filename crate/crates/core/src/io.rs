//! File formats: model JSON, single-column series CSV with a metadata
//! sidecar, fit JSON, path and CV CSVs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ar_process::{ArModel, TimeSeries};
use crate::error::{Error, Result};
use crate::lasso::{LassoFit, SolutionPath};
use crate::selection::CvResult;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, message: impl std::fmt::Display) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => format_err(path, format!("{other:?}")),
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| format_err(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let body = serde_json::to_string_pretty(value).map_err(|e| format_err(path, e))?;
    fs::write(path, body + "\n").map_err(io_err(path))
}

pub fn read_model(path: &Path) -> Result<ArModel> {
    read_json(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub p_presample: usize,
    pub n: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// `series.csv` → `series.meta.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

/// Write the series as a one-column CSV with header `x`, plus its sidecar.
pub fn write_series(path: &Path, series: &TimeSeries) -> Result<Vec<PathBuf>> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["x"]).map_err(|e| csv_err(path, e))?;
    for v in series.values() {
        w.write_record([format!("{v:?}")]).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))?;
    let meta = sidecar_path(path);
    write_json(
        &meta,
        &SeriesMeta {
            p_presample: series.p_presample(),
            n: series.n(),
            seed: series.seed(),
        },
    )?;
    Ok(vec![path.to_path_buf(), meta])
}

/// Read a one-column CSV with header `x`. The sidecar, if present, supplies
/// `p_presample`; without one the series has no pre-sample values.
pub fn read_series(path: &Path) -> Result<TimeSeries> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let headers = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.len() != 1 || headers.get(0).map(str::trim) != Some("x") {
        return Err(format_err(path, "expected a single column with header \"x\""));
    }
    let mut values = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let field = rec.get(0).unwrap_or("").trim();
        let v: f64 = field
            .parse()
            .map_err(|_| format_err(path, format!("row {}: cannot parse {field:?} as a number", i + 2)))?;
        values.push(v);
    }
    let meta_path = sidecar_path(path);
    let (p_presample, seed) = if meta_path.exists() {
        let meta: SeriesMeta = read_json(&meta_path)?;
        if meta.p_presample + meta.n != values.len() {
            return Err(format_err(
                &meta_path,
                format!(
                    "metadata says {} + {} values, CSV has {}",
                    meta.p_presample,
                    meta.n,
                    values.len()
                ),
            ));
        }
        (meta.p_presample, meta.seed)
    } else {
        (0, None)
    };
    TimeSeries::new(values, p_presample, seed).map_err(|e| format_err(path, e))
}

/// `{"phi", "support", "lambda", "kkt_residual", "objective"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub phi: Vec<f64>,
    pub support: Vec<usize>,
    pub lambda: f64,
    pub kkt_residual: f64,
    pub objective: f64,
}

impl From<&LassoFit> for FitRecord {
    fn from(f: &LassoFit) -> Self {
        Self {
            phi: f.coefficients.clone(),
            support: f.support.clone(),
            lambda: f.lambda_n,
            kkt_residual: f.kkt_residual,
            objective: f.objective,
        }
    }
}

/// Columns `lambda, lag_1, …, lag_p`, one row per knot.
pub fn write_path_csv(path: &Path, sp: &SolutionPath) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header = vec!["lambda".to_string()];
    header.extend((1..=sp.p()).map(|j| format!("lag_{j}")));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for k in &sp.knots {
        let mut row = vec![format!("{:?}", k.lambda_n)];
        row.extend(k.coefficients.iter().map(|c| format!("{c:?}")));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

/// Columns `lambda, cv_mean, cv_se`.
pub fn write_cv_csv(path: &Path, cv: &CvResult) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["lambda", "cv_mean", "cv_se"])
        .map_err(|e| csv_err(path, e))?;
    for i in 0..cv.lambda_grid.len() {
        w.write_record([
            format!("{:?}", cv.lambda_grid[i]),
            format!("{:?}", cv.cv_mean[i]),
            format!("{:?}", cv.cv_se[i]),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}
