//! Mean imputation.

use crate::data::Dataset;
use crate::error::Result;

/// Replace every missing cell by the observed mean of its column.
pub fn impute_mean(d: &Dataset) -> Result<Dataset> {
    if d.is_fully_observed() {
        return Ok(d.clone());
    }
    let means: Vec<f64> = (0..d.n_cols())
        .map(|j| crate::stats::mean(&d.observed_values_of(j)))
        .collect();
    Ok(d.completed_with(|_, j| means[j]))
}
