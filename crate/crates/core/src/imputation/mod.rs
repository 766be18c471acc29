//! Single and multiple imputation. Every imputation model regresses a
//! column on all remaining columns, target included.

mod mean;
mod mice;
mod missforest;

pub use mean::impute_mean;
pub use mice::{impute_mice_pmm, impute_mice_rf};
pub use missforest::impute_missforest;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::RfParams;
use crate::seed::SeedSpec;

/// An ordered collection of completed copies of one incomplete dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct MultipleImputation {
    pub completed: Vec<Dataset>,
    /// Non-fatal notes raised while imputing (e.g. a reduced donor pool).
    pub warnings: Vec<String>,
}

impl MultipleImputation {
    pub fn single(d: Dataset) -> Self {
        MultipleImputation {
            completed: vec![d],
            warnings: Vec::new(),
        }
    }

    pub fn m(&self) -> usize {
        self.completed.len()
    }
}

fn default_max_iter() -> usize {
    10
}
fn default_n_iter() -> usize {
    5
}
fn default_donors() -> usize {
    5
}
fn default_mice_rf_trees() -> usize {
    10
}
fn default_missforest_rf() -> RfParams {
    RfParams::default()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ImputerSpec {
    Mean,
    Missforest {
        #[serde(default = "default_max_iter")]
        max_iter: usize,
        #[serde(default = "default_missforest_rf")]
        rf: RfParams,
    },
    MicePmm {
        m: usize,
        #[serde(default = "default_n_iter")]
        n_iter: usize,
        #[serde(default = "default_donors")]
        donors: usize,
    },
    MiceRf {
        m: usize,
        #[serde(default = "default_n_iter")]
        n_iter: usize,
        #[serde(default = "default_mice_rf_trees")]
        n_trees: usize,
    },
}

impl ImputerSpec {
    pub fn label(&self) -> &'static str {
        match self {
            ImputerSpec::Mean => "mean",
            ImputerSpec::Missforest { .. } => "missforest",
            ImputerSpec::MicePmm { .. } => "mice_pmm",
            ImputerSpec::MiceRf { .. } => "mice_rf",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ImputerSpec::Mean => Ok(()),
            ImputerSpec::Missforest { max_iter, rf } => {
                if max_iter < 1 {
                    return Err(Error::InvalidSpec("missforest needs max_iter >= 1".into()));
                }
                if rf.n_trees < 1 {
                    return Err(Error::InvalidSpec("missforest needs n_trees >= 1".into()));
                }
                Ok(())
            }
            ImputerSpec::MicePmm { m, n_iter, donors } => {
                if m < 2 {
                    return Err(Error::InvalidSpec("mice needs m >= 2".into()));
                }
                if n_iter < 1 {
                    return Err(Error::InvalidSpec("mice needs n_iter >= 1".into()));
                }
                if donors < 1 {
                    return Err(Error::InvalidSpec("pmm needs donors >= 1".into()));
                }
                Ok(())
            }
            ImputerSpec::MiceRf { m, n_iter, n_trees } => {
                if m < 2 {
                    return Err(Error::InvalidSpec("mice needs m >= 2".into()));
                }
                if n_iter < 1 {
                    return Err(Error::InvalidSpec("mice needs n_iter >= 1".into()));
                }
                if n_trees < 1 {
                    return Err(Error::InvalidSpec("mice-rf needs n_trees >= 1".into()));
                }
                Ok(())
            }
        }
    }

    /// Number of completed datasets this imputer produces.
    pub fn m(&self) -> usize {
        match *self {
            ImputerSpec::Mean | ImputerSpec::Missforest { .. } => 1,
            ImputerSpec::MicePmm { m, .. } | ImputerSpec::MiceRf { m, .. } => m,
        }
    }

    /// Override the imputation count on multiple imputers; single imputers
    /// are returned unchanged.
    pub fn with_m(self, m: usize) -> Self {
        match self {
            ImputerSpec::MicePmm { n_iter, donors, .. } => {
                ImputerSpec::MicePmm { m, n_iter, donors }
            }
            ImputerSpec::MiceRf {
                n_iter, n_trees, ..
            } => ImputerSpec::MiceRf { m, n_iter, n_trees },
            other => other,
        }
    }

    pub fn impute(&self, d: &Dataset, seed: &SeedSpec) -> Result<MultipleImputation> {
        self.validate()?;
        match *self {
            ImputerSpec::Mean => Ok(MultipleImputation::single(impute_mean(d)?)),
            ImputerSpec::Missforest { max_iter, rf } => Ok(MultipleImputation::single(
                impute_missforest(d, max_iter, &rf, seed)?,
            )),
            ImputerSpec::MicePmm { m, n_iter, donors } => {
                impute_mice_pmm(d, m, n_iter, donors, seed)
            }
            ImputerSpec::MiceRf { m, n_iter, n_trees } => {
                impute_mice_rf(d, m, n_iter, n_trees, seed)
            }
        }
    }
}

/// Columns that carry missingness, ordered by increasing missing count with
/// ties broken by column index: the visit order for chained updates.
pub(crate) fn visit_order(d: &Dataset) -> Vec<usize> {
    let mut cols: Vec<(usize, usize)> = (0..d.n_cols())
        .map(|j| (d.n_missing_in_col(j), j))
        .filter(|&(miss, _)| miss > 0)
        .collect();
    cols.sort_unstable();
    cols.into_iter().map(|(_, j)| j).collect()
}

/// Predictor columns for imputing column `j`: everything else, including the
/// target.
pub(crate) fn predictors_for(d: &Dataset, j: usize) -> Vec<usize> {
    (0..d.n_cols()).filter(|&c| c != j).collect()
}
