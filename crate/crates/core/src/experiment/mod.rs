//! Simulation harness: configuration, the estimand component layout, ground
//! truth, replications, and coverage/width/bias scoring.

mod pipeline;
mod study;

pub use pipeline::{pool_estimates, run_pipeline, PipelineOutput};
pub use study::{
    compute_ground_truth, config_hash, evaluate, expected_result_rows, ground_truth_hash,
    read_ground_truth, run_replication, run_study, write_ground_truth, GroundTruth, MetricsRow,
    StudyOptions, StudyOutcome, StudySetting,
};

use serde::{Deserialize, Serialize};

use crate::dgp::DgpSpec;
use crate::error::{Error, Result};
use crate::explain::Grid;
use crate::imputation::ImputerSpec;
use crate::matrix::FeatureMatrix;
use crate::missingness::MissSpec;
use crate::models::{fit_gbt, fit_ols, GbtParams, Model};
use crate::seed::SeedSpec;
use crate::uncertainty::{ResampleSpec, VarianceMode};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerSpec {
    Ols,
    Gbt {
        #[serde(flatten)]
        params: GbtParams,
    },
}

impl LearnerSpec {
    pub fn default_gbt() -> Self {
        LearnerSpec::Gbt {
            params: GbtParams::default(),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            LearnerSpec::Ols => "ols",
            LearnerSpec::Gbt { .. } => "gbt",
        }
    }

    pub fn fit(&self, x: &FeatureMatrix, y: &[f64]) -> Result<Model> {
        Ok(match self {
            LearnerSpec::Ols => Model::Linear(fit_ols(x, y)?),
            LearnerSpec::Gbt { params } => Model::Gbt(fit_gbt(x, y, params)?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExplainerKind {
    Pd,
    Pfi,
    Shap,
}

impl ExplainerKind {
    pub fn label(&self) -> &'static str {
        match self {
            ExplainerKind::Pd => "pd",
            ExplainerKind::Pfi => "pfi",
            ExplainerKind::Shap => "shap",
        }
    }
}

fn default_alpha() -> f64 {
    0.05
}
fn default_grid_size() -> usize {
    20
}
fn default_pfi_permutations() -> usize {
    5
}

/// Full description of one simulation setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dgp: DgpSpec,
    pub n: usize,
    /// Amputation step; omit for the complete-data pipeline.
    #[serde(default)]
    pub miss: Option<MissSpec>,
    /// Imputation step; omit for the complete-data pipeline.
    #[serde(default)]
    pub imputer: Option<ImputerSpec>,
    pub learner: LearnerSpec,
    pub explainers: Vec<ExplainerKind>,
    pub resample: ResampleSpec,
    pub variance: VarianceMode,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub replications: usize,
    pub ground_truth_replications: usize,
    /// Master seed; every stream in the study derives from it.
    pub seed: u64,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    #[serde(default = "default_pfi_permutations")]
    pub pfi_permutations: usize,
    /// When set, estimates are additionally produced for each refit count in
    /// the list (reusing the fitted models of the largest).
    #[serde(default)]
    pub refit_sweep: Option<Vec<usize>>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.dgp.validate()?;
        if self.n < 10 {
            return Err(Error::InvalidConfig(format!(
                "n must be >= 10, got {}",
                self.n
            )));
        }
        if let Some(miss) = &self.miss {
            miss.validate()?;
            if self.imputer.is_none() {
                return Err(Error::InvalidConfig(
                    "miss is set but imputer is not: models cannot fit incomplete data".into(),
                ));
            }
        }
        if let Some(imputer) = &self.imputer {
            imputer.validate()?;
        }
        if self.explainers.is_empty() {
            return Err(Error::InvalidConfig("explainers must not be empty".into()));
        }
        self.resample.validate()?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must be in (0,1), got {}",
                self.alpha
            )));
        }
        if self.replications < 1 {
            return Err(Error::InvalidConfig("replications must be >= 1".into()));
        }
        if self.ground_truth_replications < 1 {
            return Err(Error::InvalidConfig(
                "ground_truth_replications must be >= 1".into(),
            ));
        }
        if self.grid_size < 2 {
            return Err(Error::InvalidConfig("grid_size must be >= 2".into()));
        }
        if self.pfi_permutations < 1 {
            return Err(Error::InvalidConfig("pfi_permutations must be >= 1".into()));
        }
        if let Some(sweep) = &self.refit_sweep {
            if sweep.is_empty() {
                return Err(Error::InvalidConfig("refit_sweep must not be empty".into()));
            }
            for &k in sweep {
                if k < 2 || k > self.resample.k {
                    return Err(Error::InvalidConfig(format!(
                        "refit_sweep entry {k} out of 2..=k (k={})",
                        self.resample.k
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn master_seed(&self) -> SeedSpec {
        SeedSpec::new(self.seed)
    }

    /// Refit counts estimates are produced for, largest first removed of
    /// duplicates, in ascending order.
    pub fn refit_counts(&self) -> Vec<usize> {
        let mut counts = self
            .refit_sweep
            .clone()
            .unwrap_or_else(|| vec![self.resample.refits_used]);
        counts.sort_unstable();
        counts.dedup();
        counts
    }

    /// Sorted, deduplicated explainer list.
    pub fn explainer_set(&self) -> Vec<ExplainerKind> {
        let mut ex = self.explainers.clone();
        ex.sort_unstable();
        ex.dedup();
        ex
    }

    /// Fields that determine the ground truth: everything up to but not
    /// including amputation and imputation.
    pub fn ground_truth_key(&self) -> serde_json::Value {
        serde_json::json!({
            "dgp": self.dgp,
            "n": self.n,
            "learner": self.learner,
            "explainers": self.explainer_set(),
            "resample": self.resample,
            "ground_truth_replications": self.ground_truth_replications,
            "seed": self.seed,
            "grid_size": self.grid_size,
            "pfi_permutations": self.pfi_permutations,
        })
    }
}

/// Address of one estimand component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentKey {
    pub explainer: ExplainerKind,
    /// Position in the feature list (target excluded).
    pub feature: usize,
    /// Grid point index for partial dependence.
    pub grid_index: Option<usize>,
}

/// Fixed ordering of all estimand components for one setting: partial
/// dependence per (feature, grid point), then importance scores per feature,
/// per explainer in `Pd < Pfi < Shap` order.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentLayout {
    explainers: Vec<ExplainerKind>,
    feature_names: Vec<String>,
    grids: Vec<Grid>,
    n_components: usize,
}

impl ComponentLayout {
    /// `grids` must hold one grid per feature when `Pd` is requested and may
    /// be empty otherwise.
    pub fn new(
        explainers: Vec<ExplainerKind>,
        feature_names: Vec<String>,
        grids: Vec<Grid>,
    ) -> Result<Self> {
        let mut explainers = explainers;
        explainers.sort_unstable();
        explainers.dedup();
        if explainers.is_empty() {
            return Err(Error::InvalidSpec("no explainers requested".into()));
        }
        if explainers.contains(&ExplainerKind::Pd) && grids.len() != feature_names.len() {
            return Err(Error::InvalidSpec(format!(
                "partial dependence needs one grid per feature: {} grids for {} features",
                grids.len(),
                feature_names.len()
            )));
        }
        let p = feature_names.len();
        let mut n = 0;
        for e in &explainers {
            n += match e {
                ExplainerKind::Pd => grids.iter().map(|g| g.points.len()).sum(),
                ExplainerKind::Pfi | ExplainerKind::Shap => p,
            };
        }
        Ok(ComponentLayout {
            explainers,
            feature_names,
            grids,
            n_components: n,
        })
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn explainers(&self) -> &[ExplainerKind] {
        &self.explainers
    }

    pub fn grids(&self) -> &[Grid] {
        &self.grids
    }

    /// Component keys in storage order.
    pub fn keys(&self) -> Vec<ComponentKey> {
        let mut keys = Vec::with_capacity(self.n_components);
        for &explainer in &self.explainers {
            match explainer {
                ExplainerKind::Pd => {
                    for (f, grid) in self.grids.iter().enumerate() {
                        for g in 0..grid.points.len() {
                            keys.push(ComponentKey {
                                explainer,
                                feature: f,
                                grid_index: Some(g),
                            });
                        }
                    }
                }
                ExplainerKind::Pfi | ExplainerKind::Shap => {
                    for f in 0..self.feature_names.len() {
                        keys.push(ComponentKey {
                            explainer,
                            feature: f,
                            grid_index: None,
                        });
                    }
                }
            }
        }
        debug_assert_eq!(keys.len(), self.n_components);
        keys
    }
}

/// The fixed partial-dependence grids for one setting, built from a
/// dedicated reference sample of the process so that every replication and
/// the ground truth evaluate the same grid points.
pub fn reference_grids(config: &ExperimentConfig) -> Result<Vec<Grid>> {
    if !config.explainer_set().contains(&ExplainerKind::Pd) {
        return Ok(Vec::new());
    }
    let seed = config.master_seed().child("grid_reference", 0);
    let data = crate::dgp::sample(&config.dgp, config.n, &seed)?;
    let features = data.feature_indices();
    features
        .iter()
        .enumerate()
        .map(|(pos, &col)| {
            let values: Vec<f64> = (0..data.n_rows()).map(|i| data.value(i, col)).collect();
            crate::explain::make_grid(pos, &values, config.grid_size)
        })
        .collect()
}

/// Build the component layout for a config.
pub fn layout_for(config: &ExperimentConfig) -> Result<ComponentLayout> {
    let feature_names: Vec<String> = (1..=config.dgp.p).map(|j| format!("x{j}")).collect();
    ComponentLayout::new(
        config.explainer_set(),
        feature_names,
        reference_grids(config)?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::DgpKind;
    use crate::uncertainty::ResampleStrategy;

    pub(crate) fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            dgp: DgpSpec {
                kind: DgpKind::Linear,
                p: 4,
                rho: 0.5,
                noise_sd: 1.0,
            },
            n: 80,
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
            replications: 3,
            ground_truth_replications: 3,
            seed: 42,
            grid_size: 5,
            pfi_permutations: 2,
            refit_sweep: None,
        }
    }

    #[test]
    fn component_count_matches_hand_count() {
        // pd: 4 features x 5 grid points, pfi: 4, shap: 4
        let config = small_config();
        let layout = layout_for(&config).unwrap();
        assert_eq!(layout.n_components(), 4 * 5 + 4 + 4);
        assert_eq!(layout.keys().len(), layout.n_components());
    }

    #[test]
    fn grid_count_for_default_sizes() {
        let mut config = small_config();
        config.grid_size = 20;
        let layout = layout_for(&config).unwrap();
        assert_eq!(layout.n_components(), 88);
    }

    #[test]
    fn reference_grids_are_deterministic() {
        let config = small_config();
        let a = reference_grids(&config).unwrap();
        let b = reference_grids(&config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
    }

    #[test]
    fn config_validation_catches_missing_imputer() {
        let mut config = small_config();
        config.miss = Some(crate::missingness::MissSpec {
            mechanism: crate::missingness::Mechanism::Mar,
            proportion: 0.4,
        });
        assert!(config.validate().is_err());
        config.imputer = Some(ImputerSpec::Mean);
        assert!(config.validate().is_ok());
    }

    #[test]
    fn config_round_trips_through_json() {
        let mut config = small_config();
        config.imputer = Some(ImputerSpec::MicePmm {
            m: 10,
            n_iter: 5,
            donors: 5,
        });
        config.miss = Some(crate::missingness::MissSpec {
            mechanism: crate::missingness::Mechanism::Mcar,
            proportion: 0.1,
        });
        let json = serde_json::to_string_pretty(&config).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(config, back);
    }

    #[test]
    fn refit_counts_default_to_refits_used() {
        let mut config = small_config();
        assert_eq!(config.refit_counts(), vec![4]);
        config.refit_sweep = Some(vec![3, 2, 3]);
        assert_eq!(config.refit_counts(), vec![2, 3]);
    }
}
