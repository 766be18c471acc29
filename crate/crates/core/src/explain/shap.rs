//! Shapley-value explanations: exact linear attribution, the classical
//! enumeration formula, and global importance as mean absolute values.

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::models::{LinearModel, Model};

/// Per-instance Shapley attribution. `phi` sums to the prediction minus
/// `expected_value`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapRow {
    pub phi: Vec<f64>,
    pub expected_value: f64,
}

impl ShapRow {
    pub fn reconstructed_prediction(&self) -> f64 {
        self.expected_value + self.phi.iter().sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImportanceKind {
    Pfi,
    ShapGlobal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceVector {
    pub kind: ImportanceKind,
    pub scores: Vec<f64>,
}

/// Exact Shapley values of a linear model against the background mean:
/// `phi_j = beta_j * (x_j - mean_j)`.
pub fn shap_linear(model: &LinearModel, x: &[f64], background: &FeatureMatrix) -> Result<ShapRow> {
    if background.n_rows() == 0 {
        return Err(Error::InvalidSpec("empty shap background".into()));
    }
    if x.len() != model.n_features() || background.n_cols() != model.n_features() {
        return Err(Error::DimensionMismatch(
            "shap_linear feature count mismatch".into(),
        ));
    }
    let means = background.col_means();
    let phi = model
        .coefficients
        .iter()
        .zip(x.iter().zip(&means))
        .map(|(b, (v, m))| b * (v - m))
        .collect();
    Ok(ShapRow {
        phi,
        expected_value: model.predict_row(&means),
    })
}

/// Shapley values by enumeration of all coalitions:
/// `phi_j = sum_S |S|! (p-|S|-1)! / p! * (v(S + j) - v(S))`.
///
/// The coalition is passed as a membership mask of length `p`.
pub fn shap_bruteforce(value_fn: impl Fn(&[bool]) -> f64, p: usize) -> Result<Vec<f64>> {
    if p == 0 || p > 12 {
        return Err(Error::InvalidSpec(format!(
            "brute-force Shapley limited to 1..=12 players, got {p}"
        )));
    }
    let mut factorial = [1.0f64; 13];
    for i in 1..=12 {
        factorial[i] = factorial[i - 1] * i as f64;
    }

    // evaluate the game once per coalition
    let n_masks = 1usize << p;
    let mut values = Vec::with_capacity(n_masks);
    let mut members = vec![false; p];
    for mask in 0..n_masks {
        for (j, m) in members.iter_mut().enumerate() {
            *m = mask & (1 << j) != 0;
        }
        values.push(value_fn(&members));
    }

    let mut phi = vec![0.0; p];
    for (j, phi_j) in phi.iter_mut().enumerate() {
        let bit = 1usize << j;
        for mask in 0..n_masks {
            if mask & bit != 0 {
                continue;
            }
            let s = (mask as u32).count_ones() as usize;
            let weight = factorial[s] * factorial[p - s - 1] / factorial[p];
            *phi_j += weight * (values[mask | bit] - values[mask]);
        }
    }
    Ok(phi)
}

/// Global importance: mean absolute Shapley value per feature over the test
/// rows. Linear models use the exact attribution against `background`
/// (defaulting to the test set itself); boosted trees use the tree explainer.
pub fn shap_global(
    model: &Model,
    x_test: &FeatureMatrix,
    background: Option<&FeatureMatrix>,
) -> Result<ImportanceVector> {
    if x_test.n_rows() == 0 {
        return Err(Error::InvalidSpec("empty shap test set".into()));
    }
    let p = x_test.n_cols();
    let mut scores = vec![0.0; p];
    let mut row = Vec::with_capacity(p);
    for i in 0..x_test.n_rows() {
        x_test.row_into(i, &mut row);
        let shap = match model {
            Model::Linear(m) => shap_linear(m, &row, background.unwrap_or(x_test))?,
            Model::Gbt(m) => super::treeshap(m, &row)?,
            Model::Forest(_) => {
                return Err(Error::InvalidSpec(
                    "global shap is defined for linear and boosted models".into(),
                ));
            }
        };
        for (s, v) in scores.iter_mut().zip(&shap.phi) {
            *s += v.abs();
        }
    }
    let n = x_test.n_rows() as f64;
    scores.iter_mut().for_each(|s| *s /= n);
    Ok(ImportanceVector {
        kind: ImportanceKind::ShapGlobal,
        scores,
    })
}
