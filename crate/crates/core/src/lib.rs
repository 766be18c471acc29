//! Confidence intervals for interpretable-ML explanations under missing
//! data.
//!
//! The crate ties together data ingestion, synthetic data generation,
//! amputation, single and multiple imputation, model fitting, explanation
//! methods (partial dependence, permutation importance, Shapley values),
//! resampling-based variance estimation with Rubin's-rules pooling, and a
//! simulation harness that scores interval coverage, width and bias against
//! a simulated ground truth.

pub mod analyze;
pub mod data;
pub mod dgp;
pub mod error;
pub mod experiment;
pub mod explain;
pub mod imputation;
pub mod matrix;
pub mod missingness;
pub mod models;
pub mod seed;
pub mod stats;
pub mod uncertainty;

pub use data::{column_stats, load_csv, write_csv, ColumnStats, Dataset};
pub use error::{Error, Result};
pub use matrix::FeatureMatrix;
pub use seed::SeedSpec;
