//! Explanation pipeline over a user-supplied dataset: optional amputation
//! and imputation, resampled model refits, explanation confidence intervals
//! and test-error reporting.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::experiment::{
    pool_estimates, run_pipeline, ComponentLayout, ExplainerKind, LearnerSpec,
};
use crate::imputation::ImputerSpec;
use crate::missingness::{self, MissSpec};
use crate::seed::SeedSpec;
use crate::uncertainty::{PooledEstimate, ResampleSpec, VarianceMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeOptions {
    /// Simulate missingness on the (complete) input before imputing.
    #[serde(default)]
    pub miss: Option<MissSpec>,
    /// Imputer; omit to analyze the data as loaded.
    #[serde(default)]
    pub imputer: Option<ImputerSpec>,
    pub learner: LearnerSpec,
    pub explainers: Vec<ExplainerKind>,
    pub resample: ResampleSpec,
    pub variance: VarianceMode,
    pub alpha: f64,
    pub grid_size: usize,
    pub pfi_permutations: usize,
    pub seed: u64,
}

/// One pooled estimate with its component address.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRow {
    pub explainer: ExplainerKind,
    pub feature: String,
    /// Grid value for partial-dependence rows.
    pub grid_value: Option<f64>,
    pub estimate: PooledEstimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeReport {
    pub rows: Vec<EstimateRow>,
    /// `(imputation, refit, test mse)` per fitted model.
    pub mse_per_fit: Vec<(usize, usize, f64)>,
    /// Mean over all fitted models.
    pub mean_mse: f64,
    pub warnings: Vec<String>,
}

impl AnalyzeReport {
    /// The pooled estimate for one (explainer, feature) score.
    pub fn score(&self, explainer: ExplainerKind, feature: &str) -> Option<&PooledEstimate> {
        self.rows
            .iter()
            .find(|r| r.explainer == explainer && r.feature == feature && r.grid_value.is_none())
            .map(|r| &r.estimate)
    }
}

/// Run the full pipeline on a loaded dataset.
///
/// Partial-dependence grids come from the input data before any amputation,
/// so runs with different imputers on the same file share grid points.
pub fn explain_dataset(data: &Dataset, options: &AnalyzeOptions) -> Result<AnalyzeReport> {
    if !data.is_fully_observed() && options.miss.is_some() {
        return Err(Error::InvalidSpec(
            "amputation requires fully observed input".into(),
        ));
    }
    if !(options.alpha > 0.0 && options.alpha < 1.0) {
        return Err(Error::InvalidConfig("alpha must be in (0,1)".into()));
    }
    options.resample.validate()?;
    if let Some(imputer) = &options.imputer {
        imputer.validate()?;
    }
    let seed = SeedSpec::new(options.seed);

    let features = data.feature_indices();
    let feature_names: Vec<String> = features
        .iter()
        .map(|&j| data.col_name(j).to_owned())
        .collect();
    let mut explainers = options.explainers.clone();
    explainers.sort_unstable();
    explainers.dedup();
    let grids = if explainers.contains(&ExplainerKind::Pd) {
        features
            .iter()
            .enumerate()
            .map(|(pos, &col)| {
                crate::explain::make_grid(pos, &data.observed_values_of(col), options.grid_size)
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let layout = ComponentLayout::new(explainers, feature_names, grids)?;

    let amputed = match &options.miss {
        Some(miss) => missingness::ampute(data, miss, &seed.child("ampute", 0))?,
        None => data.clone(),
    };
    let mut warnings = Vec::new();
    let completed: Vec<Dataset> = match &options.imputer {
        Some(imputer) => {
            let mi = imputer.impute(&amputed, &seed.child("impute", 0))?;
            warnings.extend(mi.warnings);
            mi.completed
        }
        None => {
            if !amputed.is_fully_observed() {
                return Err(Error::InvalidSpec(
                    "dataset has missing values; select an imputer".into(),
                ));
            }
            vec![amputed]
        }
    };

    let refits = options.resample.refits_used;
    let output = run_pipeline(
        &completed,
        &options.learner,
        &options.resample,
        &layout,
        options.pfi_permutations,
        refits,
        &seed.child("pipeline", 0),
    )?;
    let estimates = pool_estimates(
        &output,
        &options.resample,
        data.n_rows(),
        options.variance,
        options.alpha,
        refits,
        &layout,
    )?;

    let mut rows = Vec::with_capacity(estimates.len());
    for (key, estimate) in layout.keys().iter().zip(estimates) {
        rows.push(EstimateRow {
            explainer: key.explainer,
            feature: layout.feature_names()[key.feature].clone(),
            grid_value: key
                .grid_index
                .map(|g| layout.grids()[key.feature].points[g]),
            estimate,
        });
    }
    let mut mse_per_fit = Vec::new();
    for (d, row) in output.mse.iter().enumerate() {
        for (j, &mse) in row.iter().enumerate() {
            mse_per_fit.push((d, j, mse));
        }
    }
    Ok(AnalyzeReport {
        rows,
        mean_mse: output.mean_mse(refits),
        mse_per_fit,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{self, DgpKind, DgpSpec};
    use crate::uncertainty::ResampleStrategy;

    fn options() -> AnalyzeOptions {
        AnalyzeOptions {
            miss: None,
            imputer: None,
            learner: LearnerSpec::default_gbt(),
            explainers: vec![ExplainerKind::Pd, ExplainerKind::Pfi, ExplainerKind::Shap],
            resample: ResampleSpec {
                strategy: ResampleStrategy::Bootstrap,
                k: 4,
                refits_used: 4,
            },
            variance: VarianceMode { adjusted: true },
            alpha: 0.05,
            grid_size: 5,
            pfi_permutations: 2,
            seed: 7,
        }
    }

    fn sample_data() -> Dataset {
        let spec = DgpSpec {
            kind: DgpKind::Linear,
            p: 3,
            rho: 0.5,
            noise_sd: 1.0,
        };
        dgp::sample(&spec, 90, &SeedSpec::new(1)).unwrap()
    }

    #[test]
    fn report_shape_and_determinism() {
        let data = sample_data();
        let opts = options();
        let a = explain_dataset(&data, &opts).unwrap();
        let b = explain_dataset(&data, &opts).unwrap();
        assert_eq!(a, b);
        // pd rows: 3 features x 5 points; pfi + shap: 3 each
        assert_eq!(a.rows.len(), 15 + 3 + 3);
        assert_eq!(a.mse_per_fit.len(), 4);
        assert!(a.mean_mse > 0.0);
        assert!(a.score(ExplainerKind::Pfi, "x1").is_some());
        assert!(a.score(ExplainerKind::Shap, "x9").is_none());
    }

    #[test]
    fn tighter_alpha_nests_intervals() {
        let data = sample_data();
        let mut wide = options();
        wide.alpha = 0.05;
        let mut narrow = options();
        narrow.alpha = 0.5;
        let a = explain_dataset(&data, &wide).unwrap();
        let b = explain_dataset(&data, &narrow).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert_eq!(x.estimate.point, y.estimate.point);
            if x.estimate.variance > 0.0 {
                assert!(y.estimate.ci.0 > x.estimate.ci.0);
                assert!(y.estimate.ci.1 < x.estimate.ci.1);
            }
        }
    }

    #[test]
    fn missing_values_without_imputer_is_an_error() {
        let data = sample_data();
        let mut opts = options();
        opts.miss = Some(MissSpec {
            mechanism: crate::missingness::Mechanism::Mcar,
            proportion: 0.2,
        });
        assert!(explain_dataset(&data, &opts).is_err());
        opts.imputer = Some(ImputerSpec::Mean);
        assert!(explain_dataset(&data, &opts).is_ok());
    }
}
