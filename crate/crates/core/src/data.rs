//! Numeric tabular data with a missingness mask, plus CSV ingestion.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

/// Sentinel payload stored in unobserved cells. Never read by any
/// computation; all consumers branch on the mask first.
const SENTINEL: f64 = f64::NAN;

/// An n-by-p numeric table with a cell-level observation mask.
///
/// The target column participates in `values` like any other column.
/// Datasets are immutable after construction; amputation and imputation
/// produce new datasets.
#[derive(Debug, Clone)]
pub struct Dataset {
    values: Vec<f64>, // row-major n*p
    mask: Vec<bool>,  // true = observed
    n: usize,
    p: usize,
    col_names: Vec<String>,
    target_idx: usize,
}

impl PartialEq for Dataset {
    /// Equality over shape, names, target, mask and observed values; the
    /// sentinel payload of unobserved cells is ignored.
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.p == other.p
            && self.target_idx == other.target_idx
            && self.col_names == other.col_names
            && self.mask == other.mask
            && self
                .values
                .iter()
                .zip(&other.values)
                .zip(&self.mask)
                .all(|((a, b), &obs)| !obs || a == b)
    }
}

impl Dataset {
    /// Build a dataset from row-major values and an explicit mask.
    /// Unobserved cells are overwritten with the sentinel payload.
    pub fn new(
        mut values: Vec<f64>,
        mask: Vec<bool>,
        col_names: Vec<String>,
        target_idx: usize,
    ) -> Result<Self> {
        let p = col_names.len();
        if p < 2 {
            return Err(Error::InvalidSpec(format!(
                "dataset needs at least 2 columns, got {p}"
            )));
        }
        if values.len() != mask.len() || !values.len().is_multiple_of(p) || values.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "values/mask length {} not a nonzero multiple of column count {p}",
                values.len()
            )));
        }
        if target_idx >= p {
            return Err(Error::InvalidSpec(format!(
                "target index {target_idx} out of range for {p} columns"
            )));
        }
        let n = values.len() / p;
        for j in 0..p {
            if !(0..n).any(|i| mask[i * p + j]) {
                return Err(Error::EmptyColumn(col_names[j].clone()));
            }
        }
        for (v, &obs) in values.iter_mut().zip(&mask) {
            if obs {
                if !v.is_finite() {
                    return Err(Error::InvalidSpec(
                        "observed cells must be finite".to_owned(),
                    ));
                }
            } else {
                *v = SENTINEL;
            }
        }
        Ok(Dataset {
            values,
            mask,
            n,
            p,
            col_names,
            target_idx,
        })
    }

    /// Fully observed dataset from row-major values.
    pub fn complete(values: Vec<f64>, col_names: Vec<String>, target_idx: usize) -> Result<Self> {
        let mask = vec![true; values.len()];
        Dataset::new(values, mask, col_names, target_idx)
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_cols(&self) -> usize {
        self.p
    }

    pub fn col_names(&self) -> &[String] {
        &self.col_names
    }

    pub fn col_name(&self, j: usize) -> &str {
        &self.col_names[j]
    }

    pub fn target_idx(&self) -> usize {
        self.target_idx
    }

    /// Column indices of the features (everything but the target).
    pub fn feature_indices(&self) -> Vec<usize> {
        (0..self.p).filter(|&j| j != self.target_idx).collect()
    }

    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.mask[i * self.p + j]
    }

    /// Value of an observed cell. Panics on a masked cell: numeric kernels
    /// must never consume the sentinel payload.
    pub fn value(&self, i: usize, j: usize) -> f64 {
        assert!(
            self.mask[i * self.p + j],
            "read of unobserved cell ({i}, {j})"
        );
        self.values[i * self.p + j]
    }

    pub fn is_fully_observed(&self) -> bool {
        self.mask.iter().all(|&m| m)
    }

    pub fn n_missing_in_col(&self, j: usize) -> usize {
        (0..self.n).filter(|&i| !self.mask[i * self.p + j]).count()
    }

    pub fn missing_rows_of(&self, j: usize) -> Vec<usize> {
        (0..self.n)
            .filter(|&i| !self.mask[i * self.p + j])
            .collect()
    }

    pub fn observed_rows_of(&self, j: usize) -> Vec<usize> {
        (0..self.n).filter(|&i| self.mask[i * self.p + j]).collect()
    }

    pub fn observed_values_of(&self, j: usize) -> Vec<f64> {
        (0..self.n)
            .filter(|&i| self.mask[i * self.p + j])
            .map(|i| self.values[i * self.p + j])
            .collect()
    }

    /// New dataset with the given cells masked out. Values are untouched
    /// except that masked cells carry the sentinel.
    pub fn with_masked_cells(&self, cells: &[(usize, usize)]) -> Result<Self> {
        let mut mask = self.mask.clone();
        for &(i, j) in cells {
            mask[i * self.p + j] = false;
        }
        Dataset::new(
            self.values.clone(),
            mask,
            self.col_names.clone(),
            self.target_idx,
        )
    }

    /// New fully observed dataset: observed cells keep their values,
    /// missing cells take values from `fill`.
    pub fn completed_with(&self, fill: impl Fn(usize, usize) -> f64) -> Self {
        let mut values = self.values.clone();
        for i in 0..self.n {
            for j in 0..self.p {
                if !self.mask[i * self.p + j] {
                    values[i * self.p + j] = fill(i, j);
                }
            }
        }
        Dataset::complete(values, self.col_names.clone(), self.target_idx)
            .expect("completed dataset is valid")
    }

    /// Feature matrix and target vector of a fully observed dataset.
    pub fn xy(&self) -> (FeatureMatrix, Vec<f64>) {
        assert!(self.is_fully_observed(), "xy() requires complete data");
        let x = self.columns_matrix(&self.feature_indices(), None);
        let y = (0..self.n)
            .map(|i| self.values[i * self.p + self.target_idx])
            .collect();
        (x, y)
    }

    /// Matrix of the given columns over the given rows (all rows if `None`).
    /// Every requested cell must be observed.
    pub fn columns_matrix(&self, cols: &[usize], rows: Option<&[usize]>) -> FeatureMatrix {
        let collect_col = |j: usize| -> Vec<f64> {
            match rows {
                Some(rows) => rows.iter().map(|&i| self.value(i, j)).collect(),
                None => (0..self.n).map(|i| self.value(i, j)).collect(),
            }
        };
        FeatureMatrix::from_columns(cols.iter().map(|&j| collect_col(j)).collect())
    }

    /// Target values over the given rows (all rows if `None`).
    pub fn target_values(&self, rows: Option<&[usize]>) -> Vec<f64> {
        match rows {
            Some(rows) => rows
                .iter()
                .map(|&i| self.value(i, self.target_idx))
                .collect(),
            None => (0..self.n)
                .map(|i| self.value(i, self.target_idx))
                .collect(),
        }
    }
}

/// Per-column summary over observed cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnStats {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    pub missing_rate: f64,
}

/// Mean, standard deviation and missing rate per column, computed over
/// observed cells only.
pub fn column_stats(d: &Dataset) -> Vec<ColumnStats> {
    (0..d.n_cols())
        .map(|j| {
            let obs = d.observed_values_of(j);
            let mean = crate::stats::mean(&obs);
            let sd = crate::stats::sample_variance(&obs).sqrt();
            ColumnStats {
                name: d.col_name(j).to_owned(),
                mean,
                sd,
                missing_rate: 1.0 - obs.len() as f64 / d.n_rows() as f64,
            }
        })
        .collect()
}

fn is_na_token(field: &str) -> bool {
    let t = field.trim();
    t.is_empty() || t.eq_ignore_ascii_case("na")
}

/// Load a delimited text file with a mandatory header row.
///
/// Empty fields and the literal `NA` (any case) parse as missing. Every
/// other field must parse as a number.
pub fn load_csv(path: impl AsRef<Path>, delimiter: char, target_name: &str) -> Result<Dataset> {
    let file = File::open(path.as_ref())?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter as u8)
        .has_headers(true)
        .flexible(false)
        .from_reader(file);

    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_owned())
        .collect();
    let target_idx = headers
        .iter()
        .position(|h| h == target_name)
        .ok_or_else(|| Error::UnknownTarget(target_name.to_owned()))?;

    let mut values = Vec::new();
    let mut mask = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        for (col_idx, field) in record.iter().enumerate() {
            if is_na_token(field) {
                values.push(SENTINEL);
                mask.push(false);
            } else {
                let v: f64 = field.trim().parse().map_err(|_| Error::BadCell {
                    row: row_idx + 2, // 1-based file line, after the header
                    column: headers[col_idx].clone(),
                    value: field.to_owned(),
                })?;
                values.push(v);
                mask.push(true);
            }
        }
    }
    if values.is_empty() {
        return Err(Error::InvalidSpec("file has no data rows".to_owned()));
    }
    Dataset::new(values, mask, headers, target_idx)
}

/// Write a dataset back out; missing cells become `NA`.
///
/// Values are written in the shortest round-trip decimal form, so loading
/// the file again reproduces them bit-exactly.
pub fn write_csv(d: &Dataset, path: impl AsRef<Path>, delimiter: char) -> Result<()> {
    let file = File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    let sep = delimiter.to_string();
    writeln!(w, "{}", d.col_names().join(&sep))?;
    for i in 0..d.n_rows() {
        let row: Vec<String> = (0..d.n_cols())
            .map(|j| {
                if d.is_observed(i, j) {
                    d.value(i, j).to_string()
                } else {
                    "NA".to_owned()
                }
            })
            .collect();
        writeln!(w, "{}", row.join(&sep))?;
    }
    w.flush()?;
    Ok(())
}
