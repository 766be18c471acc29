//! Path-dependent SHAP for tree ensembles.
//!
//! Computes, per instance, the exact Shapley values of the cover-based
//! conditional-expectation game: descending a tree, a feature inside the
//! coalition follows the instance's split direction, a feature outside it
//! splits proportionally to the child covers. `gbt_value_function` exposes
//! that game directly so enumeration oracles can check the fast algorithm.

use crate::error::{Error, Result};
use crate::explain::ShapRow;
use crate::models::tree::{Node, RegressionTree};
use crate::models::GbtModel;

/// SHAP values for one instance under a boosted-tree model.
pub fn treeshap(model: &GbtModel, x: &[f64]) -> Result<ShapRow> {
    if x.len() != model.n_features() {
        return Err(Error::DimensionMismatch(format!(
            "treeshap instance has {} features, model expects {}",
            x.len(),
            model.n_features()
        )));
    }
    let mut phi = vec![0.0; x.len()];
    let max_depth = model
        .trees
        .iter()
        .map(RegressionTree::max_depth)
        .max()
        .unwrap_or(0);
    let cap = (max_depth + 3) * (max_depth + 4) / 2;
    let mut path = vec![PathItem::default(); cap];
    for tree in &model.trees {
        tree_shap_recursive(tree, x, &mut phi, 0, &mut path, 0, 1.0, 1.0, None);
    }
    for v in &mut phi {
        *v *= model.learning_rate;
    }
    Ok(ShapRow {
        phi,
        expected_value: treeshap_expected_value(model),
    })
}

/// Cover-weighted expectation of the ensemble output (the empty-coalition
/// value of the game).
pub fn treeshap_expected_value(model: &GbtModel) -> f64 {
    model.base_score
        + model.learning_rate
            * model
                .trees
                .iter()
                .map(RegressionTree::expectation)
                .sum::<f64>()
}

/// The coalition game explained by [`treeshap`]: features in the coalition
/// follow `x` down each tree, the rest are averaged out by cover.
pub fn gbt_value_function(model: &GbtModel, x: &[f64], coalition: &[bool]) -> f64 {
    model.base_score
        + model.learning_rate
            * model
                .trees
                .iter()
                .map(|t| tree_expectation_given(t, 0, x, coalition))
                .sum::<f64>()
}

fn tree_expectation_given(tree: &RegressionTree, idx: usize, x: &[f64], coalition: &[bool]) -> f64 {
    match tree.node(idx) {
        Node::Leaf { value, .. } => *value,
        Node::Split {
            feature,
            threshold,
            left,
            right,
            cover,
            ..
        } => {
            if coalition[*feature] {
                let child = if x[*feature] < *threshold {
                    *left
                } else {
                    *right
                };
                tree_expectation_given(tree, child, x, coalition)
            } else {
                let lw = tree.node(*left).cover();
                let rw = tree.node(*right).cover();
                (lw * tree_expectation_given(tree, *left, x, coalition)
                    + rw * tree_expectation_given(tree, *right, x, coalition))
                    / cover
            }
        }
    }
}

#[derive(Debug, Clone, Default)]
struct PathItem {
    feature: Option<usize>,
    zero_fraction: f64,
    one_fraction: f64,
    pweight: f64,
}

#[allow(clippy::too_many_arguments)]
fn tree_shap_recursive(
    tree: &RegressionTree,
    x: &[f64],
    phi: &mut [f64],
    node_idx: usize,
    unique_path: &mut [PathItem],
    unique_depth: usize,
    parent_zero_fraction: f64,
    parent_one_fraction: f64,
    parent_feature: Option<usize>,
) {
    extend_path(
        unique_path,
        unique_depth,
        parent_zero_fraction,
        parent_one_fraction,
        parent_feature,
    );
    let mut unique_depth = unique_depth;
    match tree.node(node_idx) {
        Node::Leaf { value, .. } => {
            for i in 1..=unique_depth {
                let weight = unwound_path_sum(unique_path, unique_depth, i);
                let item = &unique_path[i];
                let feature = item.feature.expect("non-root path items carry a feature");
                phi[feature] += weight * (item.one_fraction - item.zero_fraction) * value;
            }
        }
        Node::Split {
            feature,
            threshold,
            left,
            right,
            cover,
            ..
        } => {
            let goes_left = x[*feature] < *threshold;
            let (hot, cold) = if goes_left {
                (*left, *right)
            } else {
                (*right, *left)
            };
            let hot_zero_fraction = tree.node(hot).cover() / cover;
            let cold_zero_fraction = tree.node(cold).cover() / cover;
            let mut incoming_zero_fraction = 1.0;
            let mut incoming_one_fraction = 1.0;

            // a feature already on the path is conditioned once: undo its
            // previous extension and fold its fractions into this split
            if let Some(k) = (1..=unique_depth).find(|&i| unique_path[i].feature == Some(*feature))
            {
                incoming_zero_fraction = unique_path[k].zero_fraction;
                incoming_one_fraction = unique_path[k].one_fraction;
                unwind_path(unique_path, unique_depth, k);
                unique_depth -= 1;
            }

            let (parent_path, child_path) = unique_path.split_at_mut(unique_depth + 1);
            child_path[..parent_path.len()].clone_from_slice(parent_path);
            tree_shap_recursive(
                tree,
                x,
                phi,
                hot,
                child_path,
                unique_depth + 1,
                hot_zero_fraction * incoming_zero_fraction,
                incoming_one_fraction,
                Some(*feature),
            );
            child_path[..parent_path.len()].clone_from_slice(parent_path);
            tree_shap_recursive(
                tree,
                x,
                phi,
                cold,
                child_path,
                unique_depth + 1,
                cold_zero_fraction * incoming_zero_fraction,
                0.0,
                Some(*feature),
            );
        }
    }
}

fn extend_path(
    unique_path: &mut [PathItem],
    unique_depth: usize,
    zero_fraction: f64,
    one_fraction: f64,
    feature: Option<usize>,
) {
    unique_path[unique_depth] = PathItem {
        feature,
        zero_fraction,
        one_fraction,
        pweight: if unique_depth == 0 { 1.0 } else { 0.0 },
    };
    for i in (0..unique_depth).rev() {
        unique_path[i + 1].pweight +=
            one_fraction * unique_path[i].pweight * (i + 1) as f64 / (unique_depth + 1) as f64;
        unique_path[i].pweight = zero_fraction * unique_path[i].pweight * (unique_depth - i) as f64
            / (unique_depth + 1) as f64;
    }
}

fn unwind_path(unique_path: &mut [PathItem], unique_depth: usize, path_index: usize) {
    let one_fraction = unique_path[path_index].one_fraction;
    let zero_fraction = unique_path[path_index].zero_fraction;
    let mut next_one_portion = unique_path[unique_depth].pweight;
    for i in (0..unique_depth).rev() {
        if one_fraction != 0.0 {
            let tmp = unique_path[i].pweight;
            unique_path[i].pweight =
                next_one_portion * (unique_depth + 1) as f64 / ((i + 1) as f64 * one_fraction);
            next_one_portion = tmp
                - unique_path[i].pweight * zero_fraction * (unique_depth - i) as f64
                    / (unique_depth + 1) as f64;
        } else {
            unique_path[i].pweight = unique_path[i].pweight * (unique_depth + 1) as f64
                / (zero_fraction * (unique_depth - i) as f64);
        }
    }
    for i in path_index..unique_depth {
        unique_path[i].feature = unique_path[i + 1].feature;
        unique_path[i].zero_fraction = unique_path[i + 1].zero_fraction;
        unique_path[i].one_fraction = unique_path[i + 1].one_fraction;
    }
}

fn unwound_path_sum(unique_path: &[PathItem], unique_depth: usize, path_index: usize) -> f64 {
    let one_fraction = unique_path[path_index].one_fraction;
    let zero_fraction = unique_path[path_index].zero_fraction;
    let mut next_one_portion = unique_path[unique_depth].pweight;
    let mut total = 0.0;
    if one_fraction != 0.0 {
        for i in (0..unique_depth).rev() {
            let tmp = next_one_portion / ((i + 1) as f64 * one_fraction);
            total += tmp;
            next_one_portion =
                unique_path[i].pweight - tmp * zero_fraction * (unique_depth - i) as f64;
        }
    } else {
        for i in (0..unique_depth).rev() {
            total += unique_path[i].pweight / (zero_fraction * (unique_depth - i) as f64);
        }
    }
    total * (unique_depth + 1) as f64
}
