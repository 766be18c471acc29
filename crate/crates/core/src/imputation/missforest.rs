//! Iterative random-forest imputation.

use crate::data::Dataset;
use crate::error::Result;
use crate::imputation::{predictors_for, visit_order};
use crate::matrix::FeatureMatrix;
use crate::models::{fit_rf, RfParams};
use crate::seed::SeedSpec;

/// Working copy of the values during the column sweeps.
struct Working {
    values: Vec<f64>, // row-major
    p: usize,
}

impl Working {
    fn matrix(&self, cols: &[usize], rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix::from_columns(
            cols.iter()
                .map(|&j| rows.iter().map(|&i| self.values[i * self.p + j]).collect())
                .collect(),
        )
    }
}

/// Mean-fill, then refit a random forest per incomplete column (ordered by
/// increasing missingness) and overwrite the missing cells with its
/// predictions, sweeping until the normalized change over imputed cells
/// increases or `max_iter` is reached. On an increase the previous sweep's
/// values are returned.
pub fn impute_missforest(
    d: &Dataset,
    max_iter: usize,
    rf: &RfParams,
    seed: &SeedSpec,
) -> Result<Dataset> {
    if d.is_fully_observed() {
        return Ok(d.clone());
    }
    let n = d.n_rows();
    let p = d.n_cols();
    let order = visit_order(d);

    // mean-fill initialization
    let means: Vec<f64> = (0..p)
        .map(|j| crate::stats::mean(&d.observed_values_of(j)))
        .collect();
    let mut work = Working {
        values: {
            let mut v = Vec::with_capacity(n * p);
            for i in 0..n {
                for (j, &mean) in means.iter().enumerate() {
                    v.push(if d.is_observed(i, j) {
                        d.value(i, j)
                    } else {
                        mean
                    });
                }
            }
            v
        },
        p,
    };

    let imputed_cells: Vec<(usize, usize)> = order
        .iter()
        .flat_map(|&j| d.missing_rows_of(j).into_iter().map(move |i| (i, j)))
        .collect();

    let mut prev_values = work.values.clone();
    let mut prev_delta = f64::INFINITY;
    for sweep in 0..max_iter {
        for (ci, &j) in order.iter().enumerate() {
            let rows_obs = d.observed_rows_of(j);
            let rows_mis = d.missing_rows_of(j);
            let predictors = predictors_for(d, j);
            let x_obs = work.matrix(&predictors, &rows_obs);
            let y_obs: Vec<f64> = rows_obs.iter().map(|&i| d.value(i, j)).collect();
            let forest = fit_rf(
                &x_obs,
                &y_obs,
                rf,
                &seed.child("sweep", sweep as u64).child("col", ci as u64),
            )?;
            let x_mis = work.matrix(&predictors, &rows_mis);
            let preds = forest.predict(&x_mis);
            for (&i, v) in rows_mis.iter().zip(preds) {
                work.values[i * p + j] = v;
            }
        }

        // normalized change over the imputed cells only
        let mut num = 0.0;
        let mut den = 0.0;
        for &(i, j) in &imputed_cells {
            let new = work.values[i * p + j];
            let old = prev_values[i * p + j];
            num += (new - old) * (new - old);
            den += new * new;
        }
        let delta = if den > 0.0 { num / den } else { 0.0 };
        if delta > prev_delta {
            return Dataset::complete(prev_values, d.col_names().to_vec(), d.target_idx());
        }
        prev_delta = delta;
        prev_values.copy_from_slice(&work.values);
    }
    Dataset::complete(work.values, d.col_names().to_vec(), d.target_idx())
}
