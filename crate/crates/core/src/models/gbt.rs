//! Gradient-boosted regression trees with squared loss and second-order
//! split gains.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::models::tree::{grow_tree_presorted, presort_columns, GrowParams, RegressionTree};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    #[serde(default = "default_rounds")]
    pub max_rounds: usize,
    #[serde(default = "default_depth")]
    pub max_depth: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
}

fn default_rounds() -> usize {
    20
}
fn default_depth() -> usize {
    2
}
fn default_learning_rate() -> f64 {
    0.3
}
fn default_lambda() -> f64 {
    1.0
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            max_rounds: default_rounds(),
            max_depth: default_depth(),
            learning_rate: default_learning_rate(),
            lambda: default_lambda(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GbtModel {
    pub base_score: f64,
    pub learning_rate: f64,
    pub lambda: f64,
    pub trees: Vec<RegressionTree>,
    n_features: usize,
}

impl GbtModel {
    /// Assemble a model from raw parts (testing and tooling).
    pub fn from_parts(
        base_score: f64,
        learning_rate: f64,
        lambda: f64,
        trees: Vec<RegressionTree>,
        n_features: usize,
    ) -> Self {
        GbtModel {
            base_score,
            learning_rate,
            lambda,
            trees,
            n_features,
        }
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let lookup = |j: usize| x[j];
        self.base_score
            + self.learning_rate
                * self
                    .trees
                    .iter()
                    .map(|t| t.predict_with(&lookup))
                    .sum::<f64>()
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Vec<f64> {
        let mut out = vec![self.base_score; x.n_rows()];
        for tree in &self.trees {
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.learning_rate * tree.predict_with(&|j| x.get(i, j));
            }
        }
        out
    }
}

/// Boost squared loss: each round fits one depth-limited tree to the current
/// residual gradients, with leaf weights `-G/(H+lambda)` and splits chosen by
/// the second-order gain.
pub fn fit_gbt(x: &FeatureMatrix, y: &[f64], params: &GbtParams) -> Result<GbtModel> {
    let n = x.n_rows();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} targets for {n} rows",
            y.len()
        )));
    }
    if n < 2 {
        return Err(Error::InvalidSpec("gbt needs at least 2 rows".into()));
    }

    let base_score = crate::stats::mean(y);
    let mut preds = vec![base_score; n];
    let hess = vec![1.0; n];
    let mut grad = vec![0.0; n];
    let lambda = params.lambda;
    let grow = GrowParams {
        lambda,
        max_depth: Some(params.max_depth),
        min_leaf: 1,
        mtry: None,
        record_stats: true,
        record_leaf_rows: false,
    };

    let sorted = presort_columns(x);
    let mut trees = Vec::with_capacity(params.max_rounds);
    for _ in 0..params.max_rounds {
        for ((g, p), t) in grad.iter_mut().zip(&preds).zip(y) {
            *g = p - t;
        }
        let tree = grow_tree_presorted(x, &grad, &hess, &sorted, &grow, &|g, h| -g / (h + lambda));
        for (p, i) in preds.iter_mut().zip(0..n) {
            *p += params.learning_rate * tree.predict_with(&|j| x.get(i, j));
        }
        trees.push(tree);
    }

    Ok(GbtModel {
        base_score,
        learning_rate: params.learning_rate,
        lambda,
        trees,
        n_features: x.n_cols(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::tree::Node;
    use approx::assert_abs_diff_eq;

    fn toy_data() -> (FeatureMatrix, Vec<f64>) {
        let x = FeatureMatrix::from_columns(vec![
            vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0],
            vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0],
        ]);
        let y = vec![0.2, 0.1, 0.4, 0.2, 2.1, 2.3, 2.0, 2.2];
        (x, y)
    }

    #[test]
    fn zero_rounds_predicts_the_mean() {
        let (x, y) = toy_data();
        let params = GbtParams {
            max_rounds: 0,
            ..GbtParams::default()
        };
        let m = fit_gbt(&x, &y, &params).unwrap();
        let mean = crate::stats::mean(&y);
        for p in m.predict(&x) {
            assert_abs_diff_eq!(p, mean);
        }
    }

    #[test]
    fn one_stump_fits_a_perfect_binary_split() {
        let x = FeatureMatrix::from_columns(vec![vec![0.0, 1.0, 2.0, 3.0]]);
        let y = vec![-1.0, -1.0, 1.0, 1.0];
        let params = GbtParams {
            max_rounds: 1,
            max_depth: 1,
            learning_rate: 1.0,
            lambda: 0.0,
        };
        let m = fit_gbt(&x, &y, &params).unwrap();
        let pred = m.predict(&x);
        assert_abs_diff_eq!(crate::stats::mse(&y, &pred), 0.0, epsilon = 1e-24);
    }

    #[test]
    fn training_mse_non_increasing_in_rounds() {
        let (x, y) = toy_data();
        let mut last = f64::INFINITY;
        for rounds in 0..=20 {
            let params = GbtParams {
                max_rounds: rounds,
                ..GbtParams::default()
            };
            let m = fit_gbt(&x, &y, &params).unwrap();
            let err = crate::stats::mse(&y, &m.predict(&x));
            assert!(
                err <= last + 1e-12,
                "mse increased at round {rounds}: {err} > {last}"
            );
            last = err;
        }
    }

    #[test]
    fn depth_limit_and_cover_bookkeeping_hold() {
        let (x, y) = toy_data();
        let m = fit_gbt(&x, &y, &GbtParams::default()).unwrap();
        assert!(!m.trees.is_empty());
        for tree in &m.trees {
            assert!(tree.max_depth() <= 2);
            assert!(tree.covers_consistent());
            assert_eq!(tree.node(0).cover(), y.len() as f64);
        }
    }

    #[test]
    fn recorded_gains_match_recomputation() {
        let (x, y) = toy_data();
        let m = fit_gbt(&x, &y, &GbtParams::default()).unwrap();
        let lambda = m.lambda;
        for tree in &m.trees {
            for node in tree.nodes() {
                if let Node::Split { stats: Some(s), .. } = node {
                    let g = s.grad_left + s.grad_right;
                    let h = s.hess_left + s.hess_right;
                    let recomputed = s.grad_left * s.grad_left / (s.hess_left + lambda)
                        + s.grad_right * s.grad_right / (s.hess_right + lambda)
                        - g * g / (h + lambda);
                    assert!((recomputed - s.gain).abs() < 1e-9);
                }
            }
        }
    }
}
