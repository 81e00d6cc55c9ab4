//! Dataset ingestion and summary helpers.
//!
//! Control columns are centered at their sample means when the dataset is
//! built; the centering constants are kept so evaluation points given on
//! the original scale can be translated into the centered coordinates used
//! by the fit.

use crate::error::{Error, Result};
use std::path::Path;

/// Ingested observations: outcome `y`, running variable `x`, optional
/// centered controls `w` (column-major), and optional group labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    /// Centered control columns, column-major.
    pub w: Vec<Vec<f64>>,
    pub w_names: Vec<String>,
    /// Per-column means removed at ingestion.
    pub w_means: Vec<f64>,
    pub group: Option<Vec<String>>,
    pub dropped_rows: usize,
}

impl Dataset {
    pub fn from_xy(x: Vec<f64>, y: Vec<f64>) -> Result<Dataset> {
        Dataset::from_parts(y, x, Vec::new(), Vec::new(), None)
    }

    /// Builds a dataset from raw (uncentered) columns; `w_raw` is
    /// column-major.
    pub fn from_parts(
        y: Vec<f64>,
        x: Vec<f64>,
        w_raw: Vec<Vec<f64>>,
        w_names: Vec<String>,
        group: Option<Vec<String>>,
    ) -> Result<Dataset> {
        if y.len() != x.len() {
            return Err(Error::SchemaError(format!(
                "y has {} rows but x has {}",
                y.len(),
                x.len()
            )));
        }
        if y.len() < 2 {
            return Err(Error::EmptyData);
        }
        for col in &w_raw {
            if col.len() != y.len() {
                return Err(Error::SchemaError(
                    "control column length mismatch".into(),
                ));
            }
        }
        if let Some(g) = &group {
            if g.len() != y.len() {
                return Err(Error::SchemaError("group column length mismatch".into()));
            }
        }
        if y.iter().chain(x.iter()).any(|v| !v.is_finite())
            || w_raw.iter().flatten().any(|v| !v.is_finite())
        {
            return Err(Error::SchemaError(
                "non-finite value in a used column".into(),
            ));
        }
        let n = y.len() as f64;
        let mut w = w_raw;
        let mut w_means = Vec::with_capacity(w.len());
        for col in &mut w {
            let mean = col.iter().sum::<f64>() / n;
            for v in col.iter_mut() {
                *v -= mean;
            }
            w_means.push(mean);
        }
        Ok(Dataset {
            y,
            x,
            w,
            w_names,
            w_means,
            group,
            dropped_rows: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Number of control columns.
    pub fn ncontrols(&self) -> usize {
        self.w.len()
    }

    /// Row `i` of the centered control matrix.
    pub fn w_row(&self, i: usize) -> Vec<f64> {
        self.w.iter().map(|col| col[i]).collect()
    }

    /// Splits by the group label into (label, sub-dataset) pairs ordered by
    /// label. Sub-datasets re-center their controls on their own rows.
    pub fn split_groups(&self) -> Result<Vec<(String, Dataset)>> {
        let group = self
            .group
            .as_ref()
            .ok_or_else(|| Error::SchemaError("no group column present".into()))?;
        let mut labels: Vec<String> = group.clone();
        labels.sort();
        labels.dedup();
        let mut out = Vec::with_capacity(labels.len());
        for label in labels {
            let idx: Vec<usize> = group
                .iter()
                .enumerate()
                .filter(|(_, g)| **g == label)
                .map(|(i, _)| i)
                .collect();
            if idx.len() < 2 {
                return Err(Error::EmptyGroup(label.clone()));
            }
            let y = idx.iter().map(|&i| self.y[i]).collect();
            let x = idx.iter().map(|&i| self.x[i]).collect();
            // reconstruct original-scale controls, re-centered per group
            let w_raw: Vec<Vec<f64>> = self
                .w
                .iter()
                .zip(&self.w_means)
                .map(|(col, mean)| idx.iter().map(|&i| col[i] + mean).collect())
                .collect();
            let sub = Dataset::from_parts(y, x, w_raw, self.w_names.clone(), None)?;
            out.push((label, sub));
        }
        Ok(out)
    }
}

/// Loads a CSV file, dropping rows with missing or non-numeric values in
/// any used column (the drop count is recorded on the dataset).
pub fn load_csv(
    path: &Path,
    y_col: &str,
    x_col: &str,
    w_cols: &[String],
    group_col: Option<&str>,
) -> Result<Dataset> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::FileError(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::FileError(e.to_string()))?
        .clone();
    let col_index = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::SchemaError(format!("column '{name}' not found in header")))
    };
    let yi = col_index(y_col)?;
    let xi = col_index(x_col)?;
    let wi: Vec<usize> = w_cols
        .iter()
        .map(|c| col_index(c))
        .collect::<Result<_>>()?;
    {
        let mut names: Vec<&str> = vec![y_col, x_col];
        names.extend(w_cols.iter().map(|s| s.as_str()));
        let mut dedup = names.clone();
        dedup.sort();
        dedup.dedup();
        if dedup.len() != names.len() {
            return Err(Error::SchemaError("duplicate column selection".into()));
        }
    }
    let gi = match group_col {
        Some(g) => Some(col_index(g)?),
        None => None,
    };

    let mut y = Vec::new();
    let mut x = Vec::new();
    let mut w_raw: Vec<Vec<f64>> = vec![Vec::new(); wi.len()];
    let mut group: Vec<String> = Vec::new();
    let mut dropped = 0usize;
    for record in reader.records() {
        let record = record.map_err(|e| Error::FileError(e.to_string()))?;
        let parse = |idx: usize| -> Option<f64> {
            record
                .get(idx)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .filter(|v| v.is_finite())
        };
        let yv = parse(yi);
        let xv = parse(xi);
        let wv: Vec<Option<f64>> = wi.iter().map(|&i| parse(i)).collect();
        let gv = gi.map(|i| record.get(i).unwrap_or("").trim().to_string());
        let group_ok = gv.as_ref().map(|g| !g.is_empty()).unwrap_or(true);
        match (yv, xv, wv.iter().all(Option::is_some) && group_ok) {
            (Some(yv), Some(xv), true) => {
                y.push(yv);
                x.push(xv);
                for (col, v) in w_raw.iter_mut().zip(wv) {
                    col.push(v.unwrap());
                }
                if let Some(g) = gv {
                    group.push(g);
                }
            }
            _ => dropped += 1,
        }
    }
    let mut data = Dataset::from_parts(
        y,
        x,
        w_raw,
        w_cols.to_vec(),
        if gi.is_some() { Some(group) } else { None },
    )?;
    data.dropped_rows = dropped;
    Ok(data)
}

/// Sample standard deviation (denominator `n−1`).
pub fn sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    if v.len() < 2 {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Generalized-inverse sample quantile `inf{u : F̂(u) ≥ q}`.
pub fn quantile(v: &[f64], q: f64) -> f64 {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let rank = ((n as f64) * q).ceil().max(1.0) as usize;
    sorted[rank.min(n) - 1]
}

pub fn median(v: &[f64]) -> f64 {
    quantile(v, 0.5)
}

/// Interquartile range.
pub fn iqr(v: &[f64]) -> f64 {
    quantile(v, 0.75) - quantile(v, 0.25)
}
