//! Random forest regression on bootstrap samples.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::models::tree::{grow_tree, GrowParams, Node, RegressionTree};
use crate::seed::SeedSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RfParams {
    pub n_trees: usize,
    /// Features tried per split; defaults to ceil(p / 3).
    pub mtry: Option<usize>,
    pub min_node: usize,
    pub max_depth: Option<usize>,
}

impl Default for RfParams {
    fn default() -> Self {
        RfParams {
            n_trees: 100,
            mtry: None,
            min_node: 5,
            max_depth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    pub trees: Vec<RegressionTree>,
    /// Bootstrap row indices each tree was trained on.
    pub bootstrap_rows: Vec<Vec<usize>>,
    n_features: usize,
}

impl RandomForest {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let lookup = |j: usize| x[j];
        self.trees
            .iter()
            .map(|t| t.predict_with(&lookup))
            .sum::<f64>()
            / self.trees.len() as f64
    }

    pub fn predict(&self, x: &FeatureMatrix) -> Vec<f64> {
        let mut out = vec![0.0; x.n_rows()];
        for tree in &self.trees {
            for (i, o) in out.iter_mut().enumerate() {
                *o += tree.predict_with(&|j| x.get(i, j));
            }
        }
        let scale = 1.0 / self.trees.len() as f64;
        out.iter_mut().for_each(|o| *o *= scale);
        out
    }

    /// In-bag training rows in the leaf that `feature_value` routes to,
    /// for the given tree.
    pub fn leaf_in_bag_rows(
        &self,
        tree_idx: usize,
        feature_value: &impl Fn(usize) -> f64,
    ) -> &[usize] {
        let tree = &self.trees[tree_idx];
        match tree.node(tree.leaf_for(feature_value)) {
            Node::Leaf { in_bag_rows, .. } => in_bag_rows,
            Node::Split { .. } => unreachable!(),
        }
    }
}

/// Fit `n_trees` variance-reduction trees, each on a bootstrap sample of the
/// rows, trying `mtry` uniformly drawn features per split. Leaves keep their
/// in-bag row multiset for donor-based imputation.
pub fn fit_rf(
    x: &FeatureMatrix,
    y: &[f64],
    params: &RfParams,
    seed: &SeedSpec,
) -> Result<RandomForest> {
    let n = x.n_rows();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} targets for {n} rows",
            y.len()
        )));
    }
    if n < params.min_node.max(1) {
        return Err(Error::InvalidSpec(format!(
            "random forest needs at least min_node={} rows, got {n}",
            params.min_node
        )));
    }
    if params.n_trees == 0 {
        return Err(Error::InvalidSpec(
            "random forest needs n_trees >= 1".into(),
        ));
    }
    let mtry = params
        .mtry
        .unwrap_or_else(|| x.n_cols().div_ceil(3))
        .min(x.n_cols());
    let grow = GrowParams {
        lambda: 0.0,
        max_depth: params.max_depth,
        min_leaf: params.min_node.max(1),
        mtry: Some(mtry),
        record_stats: false,
        record_leaf_rows: true,
    };
    let hess = vec![1.0; n];

    let mut trees = Vec::with_capacity(params.n_trees);
    let mut bootstrap_rows = Vec::with_capacity(params.n_trees);
    for t in 0..params.n_trees {
        let mut rng = seed.child("tree", t as u64).rng();
        let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let tree = grow_tree(x, y, &hess, rows.clone(), &grow, Some(&mut rng), &|g, h| {
            g / h
        });
        trees.push(tree);
        bootstrap_rows.push(rows);
    }
    Ok(RandomForest {
        trees,
        bootstrap_rows,
        n_features: x.n_cols(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{self, DgpKind, DgpSpec};

    #[test]
    fn single_deep_tree_memorizes_in_bag_rows() {
        let x = FeatureMatrix::from_columns(vec![vec![
            0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0,
        ]]);
        let y = vec![3.0, -1.0, 4.0, 1.0, -5.0, 9.0, 2.0, -6.0, 5.0, 3.5];
        let params = RfParams {
            n_trees: 1,
            mtry: None,
            min_node: 1,
            max_depth: None,
        };
        let rf = fit_rf(&x, &y, &params, &SeedSpec::new(77)).unwrap();
        for &i in &rf.bootstrap_rows[0] {
            let pred = rf.predict_row(&[x.get(i, 0)]);
            assert_eq!(pred, y[i], "in-bag row {i} not memorized");
        }
    }

    #[test]
    fn constant_target_predicts_the_constant() {
        let x = FeatureMatrix::from_columns(vec![vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]]);
        let y = vec![2.5; 6];
        let params = RfParams {
            n_trees: 5,
            min_node: 1,
            ..RfParams::default()
        };
        let rf = fit_rf(&x, &y, &params, &SeedSpec::new(1)).unwrap();
        for p in rf.predict(&x) {
            assert_eq!(p, 2.5);
        }
    }

    #[test]
    fn out_of_bag_error_beats_intercept_only_model() {
        let spec = DgpSpec {
            kind: DgpKind::Linear,
            p: 4,
            rho: 0.5,
            noise_sd: 1.0,
        };
        let d = dgp::sample(&spec, 500, &SeedSpec::new(42)).unwrap();
        let (x, y) = d.xy();
        let params = RfParams {
            n_trees: 50,
            ..RfParams::default()
        };
        let rf = fit_rf(&x, &y, &params, &SeedSpec::new(43)).unwrap();

        // out-of-bag prediction per row: average over trees not containing it
        let n = x.n_rows();
        let mut sums = vec![0.0; n];
        let mut counts = vec![0usize; n];
        for (tree, rows) in rf.trees.iter().zip(&rf.bootstrap_rows) {
            let mut in_bag = vec![false; n];
            for &i in rows {
                in_bag[i] = true;
            }
            for i in 0..n {
                if !in_bag[i] {
                    sums[i] += tree.predict_with(&|j| x.get(i, j));
                    counts[i] += 1;
                }
            }
        }
        let mut oob_se = 0.0;
        let mut oob_n = 0usize;
        for i in 0..n {
            if counts[i] > 0 {
                let pred = sums[i] / counts[i] as f64;
                oob_se += (pred - y[i]).powi(2);
                oob_n += 1;
            }
        }
        let oob_mse = oob_se / oob_n as f64;
        let var_y = crate::stats::sample_variance(&y);
        assert!(
            oob_mse < var_y,
            "oob mse {oob_mse} should beat target variance {var_y}"
        );
    }

    #[test]
    fn forest_covers_are_consistent() {
        let x = FeatureMatrix::from_columns(vec![
            (0..50).map(|i| i as f64).collect(),
            (0..50).map(|i| (i % 7) as f64).collect(),
        ]);
        let y: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let params = RfParams {
            n_trees: 10,
            ..RfParams::default()
        };
        let rf = fit_rf(&x, &y, &params, &SeedSpec::new(3)).unwrap();
        for tree in &rf.trees {
            assert!(tree.covers_consistent());
            assert_eq!(tree.node(0).cover(), 50.0);
        }
    }
}
