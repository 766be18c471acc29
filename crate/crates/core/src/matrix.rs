//! Column-major numeric matrix used as model input.

/// A dense, fully observed matrix stored by column.
///
/// Tree learners and the explainers work column-wise (sorting one feature,
/// permuting one feature, fixing one feature to a grid value), which makes
/// this layout the natural one.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    cols: Vec<Vec<f64>>,
    n_rows: usize,
}

impl FeatureMatrix {
    pub fn from_columns(cols: Vec<Vec<f64>>) -> Self {
        let n_rows = cols.first().map_or(0, Vec::len);
        assert!(
            cols.iter().all(|c| c.len() == n_rows),
            "ragged columns in FeatureMatrix"
        );
        FeatureMatrix { cols, n_rows }
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        FeatureMatrix {
            cols: vec![vec![0.0; n_rows]; n_cols],
            n_rows,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.cols[j]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.cols[j]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.cols[j][i]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.cols[j][i] = v;
    }

    /// Copy row `i` into `buf` (resized to the column count).
    pub fn row_into(&self, i: usize, buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend(self.cols.iter().map(|c| c[i]));
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.cols.iter().map(|c| c[i]).collect()
    }

    /// New matrix containing the given rows (duplicates allowed).
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let cols = self
            .cols
            .iter()
            .map(|c| rows.iter().map(|&i| c[i]).collect())
            .collect();
        FeatureMatrix {
            cols,
            n_rows: rows.len(),
        }
    }

    /// Column means.
    pub fn col_means(&self) -> Vec<f64> {
        self.cols
            .iter()
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect()
    }
}
