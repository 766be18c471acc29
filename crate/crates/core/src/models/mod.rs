//! Trainable predictors: least squares, gradient-boosted trees and random
//! forests.

mod forest;
mod gbt;
mod linear;
pub mod tree;

pub use forest::{fit_rf, RandomForest, RfParams};
pub use gbt::{fit_gbt, GbtModel, GbtParams};
pub use linear::{fit_ols, LinearModel};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

/// A fitted predictor of any supported family.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Linear(LinearModel),
    Gbt(GbtModel),
    Forest(RandomForest),
}

impl Model {
    pub fn n_features(&self) -> usize {
        match self {
            Model::Linear(m) => m.n_features(),
            Model::Gbt(m) => m.n_features(),
            Model::Forest(m) => m.n_features(),
        }
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        if x.n_cols() != self.n_features() {
            return Err(Error::DimensionMismatch(format!(
                "model expects {} features, got {}",
                self.n_features(),
                x.n_cols()
            )));
        }
        Ok(match self {
            Model::Linear(m) => m.predict(x),
            Model::Gbt(m) => m.predict(x),
            Model::Forest(m) => m.predict(x),
        })
    }
}
