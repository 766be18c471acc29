//! Model explanations: partial dependence, permutation feature importance
//! and Shapley values.

mod shap;
mod treeshap;

pub use shap::{
    shap_bruteforce, shap_global, shap_linear, ImportanceKind, ImportanceVector, ShapRow,
};
pub use treeshap::{gbt_value_function, treeshap, treeshap_expected_value};

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::models::Model;
use crate::seed::SeedSpec;

/// Evaluation points for a partial-dependence curve on one feature.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub feature: usize,
    pub points: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdCurve {
    pub grid: Grid,
    pub values: Vec<f64>,
}

/// `count` equidistant points spanning the min and max of `values`.
pub fn make_grid(feature: usize, values: &[f64], count: usize) -> Result<Grid> {
    if count < 2 {
        return Err(Error::InvalidSpec("grid needs at least 2 points".into()));
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in values {
        min = min.min(v);
        max = max.max(v);
    }
    if min.partial_cmp(&max) != Some(std::cmp::Ordering::Less) {
        return Err(Error::InvalidSpec(
            "grid needs at least 2 distinct values".into(),
        ));
    }
    let step = (max - min) / (count - 1) as f64;
    let mut points: Vec<f64> = (0..count).map(|i| min + i as f64 * step).collect();
    // pin the endpoint against accumulation error
    points[count - 1] = max;
    Ok(Grid { feature, points })
}

/// Average prediction with the grid feature clamped to each grid point.
pub fn partial_dependence(model: &Model, x_test: &FeatureMatrix, grid: &Grid) -> Result<PdCurve> {
    if grid.feature >= x_test.n_cols() {
        return Err(Error::DimensionMismatch(format!(
            "grid feature {} out of range",
            grid.feature
        )));
    }
    let mut work = x_test.clone();
    let mut values = Vec::with_capacity(grid.points.len());
    for &v in &grid.points {
        work.col_mut(grid.feature).fill(v);
        let preds = model.predict(&work)?;
        values.push(crate::stats::mean(&preds));
    }
    Ok(PdCurve {
        grid: grid.clone(),
        values,
    })
}

/// Permutation feature importance: mean increase of test MSE after permuting
/// one feature column, over `n_perm` uniformly drawn permutations.
pub fn pfi(
    model: &Model,
    x_test: &FeatureMatrix,
    y_test: &[f64],
    feature: usize,
    n_perm: usize,
    seed: &SeedSpec,
) -> Result<f64> {
    let n = x_test.n_rows();
    if n < 2 {
        return Err(Error::InvalidSpec("pfi needs at least 2 test rows".into()));
    }
    let mut rng = seed.rng();
    let perms: Vec<Vec<usize>> = (0..n_perm)
        .map(|_| {
            let mut idx: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                let j = rng.random_range(0..=i);
                idx.swap(i, j);
            }
            idx
        })
        .collect();
    pfi_with_permutations(model, x_test, y_test, feature, &perms)
}

/// PFI with the permutations supplied by the caller.
pub fn pfi_with_permutations(
    model: &Model,
    x_test: &FeatureMatrix,
    y_test: &[f64],
    feature: usize,
    perms: &[Vec<usize>],
) -> Result<f64> {
    if feature >= x_test.n_cols() {
        return Err(Error::DimensionMismatch(format!(
            "pfi feature {feature} out of range"
        )));
    }
    let base_mse = crate::stats::mse(y_test, &model.predict(x_test)?);
    let original = x_test.col(feature).to_vec();
    let mut work = x_test.clone();
    let mut total = 0.0;
    for perm in perms {
        {
            let col = work.col_mut(feature);
            for (slot, &src) in col.iter_mut().zip(perm) {
                *slot = original[src];
            }
        }
        let mse = crate::stats::mse(y_test, &model.predict(&work)?);
        total += mse - base_mse;
    }
    Ok(total / perms.len() as f64)
}
