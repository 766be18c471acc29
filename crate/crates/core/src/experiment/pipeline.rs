//! The fit/explain core shared by the simulation harness and the real-data
//! pipeline: resample each completed dataset, fit the learner per train set,
//! evaluate every requested explanation on the test set, and pool.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::experiment::{ComponentLayout, ExplainerKind, LearnerSpec};
use crate::explain;
use crate::matrix::FeatureMatrix;
use crate::models::Model;
use crate::seed::SeedSpec;
use crate::uncertainty::{
    correction_c, mi_learner_estimate, resample_indices, single_learner_estimate, PooledEstimate,
    ResamplePair, ResampleSpec, VarianceMode,
};

/// Raw per-fit results for one replication: explanation values and test MSE
/// per (imputation, refit).
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    /// `[imputation][refit][component]` explanation values.
    pub values: Vec<Vec<Vec<f64>>>,
    /// Realized resampling plans per imputation (all `k` pairs).
    pub plans: Vec<Vec<ResamplePair>>,
    /// `[imputation][refit]` test mean squared error.
    pub mse: Vec<Vec<f64>>,
}

/// Explanations of one fitted model on one test set, flattened in layout
/// order.
fn explain_fit(
    model: &Model,
    x_test: &FeatureMatrix,
    y_test: &[f64],
    layout: &ComponentLayout,
    pfi_permutations: usize,
    seed: &SeedSpec,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(layout.n_components());
    for &explainer in layout.explainers() {
        match explainer {
            ExplainerKind::Pd => {
                for grid in layout.grids() {
                    let curve = explain::partial_dependence(model, x_test, grid)?;
                    out.extend(curve.values);
                }
            }
            ExplainerKind::Pfi => {
                for f in 0..layout.n_features() {
                    out.push(explain::pfi(
                        model,
                        x_test,
                        y_test,
                        f,
                        pfi_permutations,
                        &seed.child("pfi", f as u64),
                    )?);
                }
            }
            ExplainerKind::Shap => {
                let imp = explain::shap_global(model, x_test, None)?;
                out.extend(imp.scores);
            }
        }
    }
    debug_assert_eq!(out.len(), layout.n_components());
    Ok(out)
}

/// Resample each completed dataset, fit and explain on the first
/// `max_refits` pairs. Every imputation gets its own resampling plan from a
/// child seed.
pub fn run_pipeline(
    completed: &[Dataset],
    learner: &LearnerSpec,
    resample: &ResampleSpec,
    layout: &ComponentLayout,
    pfi_permutations: usize,
    max_refits: usize,
    seed: &SeedSpec,
) -> Result<PipelineOutput> {
    if completed.is_empty() {
        return Err(Error::InvalidSpec("no completed datasets".into()));
    }
    if max_refits < 2 || max_refits > resample.k {
        return Err(Error::InvalidSpec(format!(
            "refit count {max_refits} out of 2..=k (k={})",
            resample.k
        )));
    }
    let n = completed[0].n_rows();
    let mut values = Vec::with_capacity(completed.len());
    let mut plans = Vec::with_capacity(completed.len());
    let mut mses = Vec::with_capacity(completed.len());
    for (d_idx, dataset) in completed.iter().enumerate() {
        if !dataset.is_fully_observed() {
            return Err(Error::InvalidSpec(
                "pipeline input datasets must be fully observed".into(),
            ));
        }
        let imp_seed = seed.child("imputation", d_idx as u64);
        let plan = resample_indices(n, resample, &imp_seed.child("plan", 0))?;
        let features = dataset.feature_indices();
        let mut per_refit = Vec::with_capacity(max_refits);
        let mut mse_row = Vec::with_capacity(max_refits);
        for (j, pair) in plan.iter().take(max_refits).enumerate() {
            let x_train = dataset.columns_matrix(&features, Some(&pair.train));
            let y_train = dataset.target_values(Some(&pair.train));
            let model = learner.fit(&x_train, &y_train)?;
            let x_test = dataset.columns_matrix(&features, Some(&pair.test));
            let y_test = dataset.target_values(Some(&pair.test));
            mse_row.push(crate::stats::mse(&y_test, &model.predict(&x_test)?));
            per_refit.push(explain_fit(
                &model,
                &x_test,
                &y_test,
                layout,
                pfi_permutations,
                &imp_seed.child("refit", j as u64),
            )?);
        }
        values.push(per_refit);
        plans.push(plan);
        mses.push(mse_row);
    }
    Ok(PipelineOutput {
        values,
        plans,
        mse: mses,
    })
}

impl PipelineOutput {
    pub fn mean_mse(&self, refits_used: usize) -> f64 {
        let all: Vec<f64> = self
            .mse
            .iter()
            .flat_map(|row| row.iter().take(refits_used).copied())
            .collect();
        crate::stats::mean(&all)
    }
}

/// Pool the pipeline output into one estimate per component, using the first
/// `refits_used` refits: Rubin's rules across imputations (m >= 2) or the
/// plain corrected t interval (m = 1).
pub fn pool_estimates(
    output: &PipelineOutput,
    resample: &ResampleSpec,
    n: usize,
    mode: VarianceMode,
    alpha: f64,
    refits_used: usize,
    layout: &ComponentLayout,
) -> Result<Vec<PooledEstimate>> {
    let m = output.values.len();
    let c_per_imp: Vec<f64> = output
        .plans
        .iter()
        .map(|plan| correction_c(resample, n, &plan[..refits_used.min(plan.len())], mode))
        .collect();
    let n_components = layout.n_components();
    let mut estimates = Vec::with_capacity(n_components);
    let mut row_buf: Vec<Vec<f64>> = vec![Vec::with_capacity(refits_used); m];
    for comp in 0..n_components {
        for (d, row) in row_buf.iter_mut().enumerate() {
            row.clear();
            row.extend(
                output.values[d]
                    .iter()
                    .take(refits_used)
                    .map(|refit| refit[comp]),
            );
        }
        let estimate = if m == 1 {
            single_learner_estimate(&row_buf[0], c_per_imp[0], alpha)?
        } else {
            mi_learner_estimate(&row_buf, &c_per_imp, alpha)?
        };
        estimates.push(estimate);
    }
    Ok(estimates)
}
