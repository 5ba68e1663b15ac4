//! Estimation sample: response, scalar regressor, covariates and optional
//! cluster labels.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

/// Immutable, validated estimation sample.
#[derive(Debug, Clone)]
pub struct Dataset {
    y: Vec<f64>,
    x: Vec<f64>,
    w: DMatrix<f64>,
    w_names: Vec<String>,
    cluster: Option<Vec<u32>>,
    cluster_count: usize,
}

/// Summary of what `load_csv` kept and dropped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub rows_read: usize,
    pub rows_dropped: usize,
}

/// Stable ascending ordering of `x`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SortIndex {
    pub perm: Vec<usize>,
    pub distinct_count: usize,
}

impl Dataset {
    /// Builds a dataset from columns. `w` is n×d (d may be zero).
    pub fn new(y: Vec<f64>, x: Vec<f64>, w: DMatrix<f64>, cluster: Option<Vec<u32>>) -> Result<Self> {
        let names = (0..w.ncols()).map(|k| format!("w{}", k + 1)).collect();
        Self::with_names(y, x, w, names, cluster)
    }

    /// Convenience constructor without covariates or clusters.
    pub fn from_xy(y: Vec<f64>, x: Vec<f64>) -> Result<Self> {
        let n = x.len();
        Self::new(y, x, DMatrix::zeros(n, 0), None)
    }

    pub fn with_names(
        y: Vec<f64>,
        x: Vec<f64>,
        w: DMatrix<f64>,
        w_names: Vec<String>,
        cluster: Option<Vec<u32>>,
    ) -> Result<Self> {
        let n = y.len();
        if x.len() != n || w.nrows() != n {
            return Err(Error::Data(format!(
                "column lengths differ: y={}, x={}, w={}",
                n,
                x.len(),
                w.nrows()
            )));
        }
        if n < 2 {
            return Err(Error::SampleSize { n, required: 1 });
        }
        if w_names.len() != w.ncols() {
            return Err(Error::Config("covariate name count does not match columns".into()));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("x has a non-finite value at row {}", i + 1)));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("y has a non-finite value at row {}", i + 1)));
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("covariates contain non-finite values".into()));
        }
        let mut cluster_count = 0;
        if let Some(c) = &cluster {
            if c.len() != n {
                return Err(Error::Data("cluster column length differs from y".into()));
            }
            let mut seen = c.clone();
            seen.sort_unstable();
            seen.dedup();
            cluster_count = seen.len();
            if cluster_count < 2 {
                return Err(Error::Data("need at least two distinct clusters".into()));
            }
        }
        Ok(Dataset { y, x, w, w_names, cluster, cluster_count })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.w.ncols()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn w_names(&self) -> &[String] {
        &self.w_names
    }

    pub fn cluster(&self) -> Option<&[u32]> {
        self.cluster.as_deref()
    }

    /// Number of distinct cluster labels, zero when unclustered.
    pub fn cluster_count(&self) -> usize {
        self.cluster_count
    }

    /// Same sample with the response replaced.
    pub fn with_y(&self, y: Vec<f64>) -> Result<Self> {
        Self::with_names(y, self.x.clone(), self.w.clone(), self.w_names.clone(), self.cluster.clone())
    }

    /// Same sample with the regressor replaced.
    pub fn with_x(&self, x: Vec<f64>) -> Result<Self> {
        Self::with_names(self.y.clone(), x, self.w.clone(), self.w_names.clone(), self.cluster.clone())
    }

    /// Same sample with covariates dropped.
    pub fn without_covariates(&self) -> Self {
        Dataset {
            w: DMatrix::zeros(self.n(), 0),
            w_names: Vec::new(),
            ..self.clone()
        }
    }

    /// Column means of the covariates.
    pub fn w_means(&self) -> Vec<f64> {
        let n = self.n() as f64;
        (0..self.d()).map(|k| self.w.column(k).sum() / n).collect()
    }

    pub fn sort_index(&self) -> SortIndex {
        sort_index(&self.x)
    }

    /// Reads a comma-separated file with a header row. Rows with a missing
    /// value in any selected column are dropped and counted.
    pub fn load_csv<P: AsRef<Path>>(
        path: P,
        y_col: &str,
        x_col: &str,
        w_cols: &[String],
        cluster_col: Option<&str>,
    ) -> Result<(Self, LoadReport)> {
        let file = std::fs::File::open(path.as_ref())
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.as_ref().display()))))?;
        Self::read_csv(file, y_col, x_col, w_cols, cluster_col)
    }

    pub fn read_csv<R: std::io::Read>(
        reader: R,
        y_col: &str,
        x_col: &str,
        w_cols: &[String],
        cluster_col: Option<&str>,
    ) -> Result<(Self, LoadReport)> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let find = |name: &str| -> Result<usize> {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Config(format!("column `{name}` not found in header")))
        };
        let yi = find(y_col)?;
        let xi = find(x_col)?;
        let wi: Vec<usize> = w_cols.iter().map(|c| find(c)).collect::<Result<_>>()?;
        let ci = cluster_col.map(find).transpose()?;

        let mut y = Vec::new();
        let mut x = Vec::new();
        let mut w: Vec<f64> = Vec::new();
        let mut labels: Vec<u32> = Vec::new();
        let mut label_ids: HashMap<String, u32> = HashMap::new();
        let mut rows_read = 0;
        let mut rows_dropped = 0;

        for (r, rec) in rdr.records().enumerate() {
            let rec = rec?;
            rows_read += 1;
            let row = r + 1;
            let mut numeric = Vec::with_capacity(2 + wi.len());
            let mut missing = false;
            for (&col, name) in [yi, xi].iter().chain(wi.iter()).zip(
                [y_col, x_col].into_iter().chain(w_cols.iter().map(String::as_str)),
            ) {
                match parse_cell(rec.get(col).unwrap_or(""), row, name)? {
                    Some(v) => numeric.push(v),
                    None => missing = true,
                }
            }
            let label = match ci {
                Some(c) => {
                    let s = rec.get(c).unwrap_or("");
                    if is_missing(s) {
                        missing = true;
                        None
                    } else {
                        Some(s.to_string())
                    }
                }
                None => None,
            };
            if missing {
                rows_dropped += 1;
                continue;
            }
            y.push(numeric[0]);
            x.push(numeric[1]);
            w.extend_from_slice(&numeric[2..]);
            if let Some(l) = label {
                let next = label_ids.len() as u32;
                labels.push(*label_ids.entry(l).or_insert(next));
            }
        }

        if y.is_empty() {
            return Err(Error::Data("no usable rows after dropping missing values".into()));
        }
        if rows_dropped > 0 {
            log::warn!("dropped {rows_dropped} of {rows_read} rows with missing values");
        }
        let n = y.len();
        let d = wi.len();
        let w = DMatrix::from_row_slice(n, d, &w);
        let cluster = ci.map(|_| labels);
        let data = Self::with_names(y, x, w, w_cols.to_vec(), cluster)?;
        Ok((data, LoadReport { rows_read, rows_dropped }))
    }
}

fn is_missing(s: &str) -> bool {
    matches!(s, "" | "NA" | "na" | "." | "NaN" | "nan")
}

fn parse_cell(s: &str, row: usize, column: &str) -> Result<Option<f64>> {
    if is_missing(s) {
        return Ok(None);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        Ok(_) => Ok(None),
        Err(_) => Err(Error::Parse { row, column: column.to_string(), value: s.to_string() }),
    }
}

/// Stable ascending permutation of `x` and its number of distinct values.
pub fn sort_index(x: &[f64]) -> SortIndex {
    let mut perm: Vec<usize> = (0..x.len()).collect();
    // stable sort keeps ties in original order
    perm.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let distinct_count = if perm.is_empty() {
        0
    } else {
        1 + perm.windows(2).filter(|p| x[p[0]] != x[p[1]]).count()
    };
    SortIndex { perm, distinct_count }
}

impl SortIndex {
    /// Values of `x` in sorted order.
    pub fn sorted(&self, x: &[f64]) -> Vec<f64> {
        self.perm.iter().map(|&i| x[i]).collect()
    }

    /// Inverse permutation: position of each original row in sorted order.
    pub fn inverse(&self) -> Vec<usize> {
        let mut inv = vec![0; self.perm.len()];
        for (pos, &i) in self.perm.iter().enumerate() {
            inv[i] = pos;
        }
        inv
    }
}
