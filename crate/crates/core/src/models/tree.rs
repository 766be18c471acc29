//! Binary regression trees shared by the boosted and bagged learners.
//!
//! Every node records its cover (the number of training rows routed through
//! it); the SHAP explainer and partial-dependence shortcuts rely on it.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::matrix::FeatureMatrix;

/// Gradient/hessian sums and the gain recorded when a split was taken.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitStats {
    pub grad_left: f64,
    pub hess_left: f64,
    pub grad_right: f64,
    pub hess_right: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        cover: f64,
        stats: Option<SplitStats>,
    },
    Leaf {
        value: f64,
        cover: f64,
        /// In-bag training rows that ended in this leaf. Populated only when
        /// the grower is asked to record them (donor-based imputation).
        in_bag_rows: Vec<usize>,
    },
}

impl Node {
    pub fn cover(&self) -> f64 {
        match self {
            Node::Split { cover, .. } | Node::Leaf { cover, .. } => *cover,
        }
    }
}

/// A binary regression tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    /// Assemble a tree from raw nodes; node 0 must be the root.
    pub fn from_nodes(nodes: Vec<Node>) -> Self {
        assert!(!nodes.is_empty(), "a tree needs at least one node");
        RegressionTree { nodes }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, idx: usize) -> &Node {
        &self.nodes[idx]
    }

    pub fn is_leaf(&self, idx: usize) -> bool {
        matches!(self.nodes[idx], Node::Leaf { .. })
    }

    /// Route a point to its leaf; `feature_value(j)` supplies coordinate `j`.
    pub fn leaf_for(&self, feature_value: &impl Fn(usize) -> f64) -> usize {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { .. } => return idx,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    idx = if feature_value(*feature) < *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    pub fn predict_with(&self, feature_value: &impl Fn(usize) -> f64) -> f64 {
        match &self.nodes[self.leaf_for(feature_value)] {
            Node::Leaf { value, .. } => *value,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn max_depth(&self) -> usize {
        fn depth(nodes: &[Node], idx: usize) -> usize {
            match &nodes[idx] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + depth(nodes, *left).max(depth(nodes, *right))
                }
            }
        }
        depth(&self.nodes, 0)
    }

    /// Cover-weighted expectation of the tree output.
    pub fn expectation(&self) -> f64 {
        fn expect(nodes: &[Node], idx: usize) -> f64 {
            match &nodes[idx] {
                Node::Leaf { value, .. } => *value,
                Node::Split {
                    left, right, cover, ..
                } => {
                    let lw = nodes[*left].cover();
                    let rw = nodes[*right].cover();
                    debug_assert!(*cover > 0.0);
                    (lw * expect(nodes, *left) + rw * expect(nodes, *right)) / cover
                }
            }
        }
        expect(&self.nodes, 0)
    }

    /// True when every internal node's cover equals the sum of its children.
    pub fn covers_consistent(&self) -> bool {
        self.nodes.iter().all(|n| match n {
            Node::Leaf { .. } => true,
            Node::Split {
                left, right, cover, ..
            } => {
                let sum = self.nodes[*left].cover() + self.nodes[*right].cover();
                (sum - cover).abs() <= 1e-9 * cover.max(1.0)
            }
        })
    }
}

pub(crate) struct GrowParams {
    pub lambda: f64,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features tried per split; `None` means all.
    pub mtry: Option<usize>,
    pub record_stats: bool,
    pub record_leaf_rows: bool,
}

struct Grower<'a> {
    x: &'a FeatureMatrix,
    grad: &'a [f64],
    hess: &'a [f64],
    params: &'a GrowParams,
    rng: Option<&'a mut ChaCha12Rng>,
    nodes: Vec<Node>,
    scratch: Vec<(f64, f64, f64)>,
    feature_pool: Vec<usize>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
    grad_left: f64,
    hess_left: f64,
    grad_right: f64,
    hess_right: f64,
}

impl Grower<'_> {
    /// Second-order split score before subtracting the parent term.
    fn side_score(g: f64, h: f64, lambda: f64) -> f64 {
        g * g / (h + lambda)
    }

    fn best_split(&mut self, rows: &[usize], g_sum: f64, h_sum: f64) -> Option<BestSplit> {
        let lambda = self.params.lambda;
        let parent_score = Self::side_score(g_sum, h_sum, lambda);
        // splits must beat the parent by more than accumulated rounding noise
        let min_gain = 1e-10 * parent_score.abs().max(1.0);
        let min_leaf = self.params.min_leaf;

        let n_features = self.x.n_cols();
        self.feature_pool.clear();
        self.feature_pool.extend(0..n_features);
        let candidates: &[usize] = match (self.params.mtry, self.rng.as_deref_mut()) {
            (Some(m), Some(rng)) if m < n_features => {
                // uniform draw of m distinct features, kept in ascending order
                // for deterministic tie-breaking
                for i in 0..m {
                    let j = rng.random_range(i..n_features);
                    self.feature_pool.swap(i, j);
                }
                self.feature_pool[..m].sort_unstable();
                &self.feature_pool[..m]
            }
            _ => &self.feature_pool,
        };

        let mut best: Option<BestSplit> = None;
        for &feature in candidates {
            let col = self.x.col(feature);
            self.scratch.clear();
            self.scratch
                .extend(rows.iter().map(|&i| (col[i], self.grad[i], self.hess[i])));
            self.scratch
                .sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).expect("finite feature value"));

            let mut g_left = 0.0;
            let mut h_left = 0.0;
            for idx in 0..self.scratch.len() - 1 {
                let (v, g, h) = self.scratch[idx];
                g_left += g;
                h_left += h;
                let v_next = self.scratch[idx + 1].0;
                if v_next <= v {
                    continue; // ties: no cut point between equal values
                }
                let n_left = idx + 1;
                let n_right = self.scratch.len() - n_left;
                if n_left < min_leaf || n_right < min_leaf {
                    continue;
                }
                let g_right = g_sum - g_left;
                let h_right = h_sum - h_left;
                let gain = Self::side_score(g_left, h_left, lambda)
                    + Self::side_score(g_right, h_right, lambda)
                    - parent_score;
                if gain <= min_gain {
                    continue;
                }
                // strict improvement keeps the first (lowest feature, lowest
                // threshold) candidate on exact ties
                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    best = Some(BestSplit {
                        feature,
                        threshold: 0.5 * (v + v_next),
                        gain,
                        grad_left: g_left,
                        hess_left: h_left,
                        grad_right: g_right,
                        hess_right: h_right,
                    });
                }
            }
        }
        best
    }

    fn build(
        &mut self,
        rows: Vec<usize>,
        depth: usize,
        leaf_value: &impl Fn(f64, f64) -> f64,
    ) -> usize {
        let g_sum: f64 = rows.iter().map(|&i| self.grad[i]).sum();
        let h_sum: f64 = rows.iter().map(|&i| self.hess[i]).sum();
        let cover = rows.len() as f64;

        let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
        let size_ok = rows.len() >= 2 * self.params.min_leaf;
        let split = if depth_ok && size_ok {
            self.best_split(&rows, g_sum, h_sum)
        } else {
            None
        };

        match split {
            None => {
                let idx = self.nodes.len();
                self.nodes.push(Node::Leaf {
                    value: leaf_value(g_sum, h_sum),
                    cover,
                    in_bag_rows: if self.params.record_leaf_rows {
                        rows
                    } else {
                        Vec::new()
                    },
                });
                idx
            }
            Some(s) => {
                let col = self.x.col(s.feature);
                let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
                    rows.iter().partition(|&&i| col[i] < s.threshold);
                let idx = self.nodes.len();
                self.nodes.push(Node::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left: 0,
                    right: 0,
                    cover,
                    stats: self.params.record_stats.then_some(SplitStats {
                        grad_left: s.grad_left,
                        hess_left: s.hess_left,
                        grad_right: s.grad_right,
                        hess_right: s.hess_right,
                        gain: s.gain,
                    }),
                });
                let left = self.build(left_rows, depth + 1, leaf_value);
                let right = self.build(right_rows, depth + 1, leaf_value);
                match &mut self.nodes[idx] {
                    Node::Split {
                        left: l, right: r, ..
                    } => {
                        *l = left;
                        *r = right;
                    }
                    Node::Leaf { .. } => unreachable!(),
                }
                idx
            }
        }
    }
}

/// Row indices per feature, ordered by feature value. Shared across
/// boosting rounds, which split the same row set every round.
pub(crate) fn presort_columns(x: &FeatureMatrix) -> Vec<Vec<u32>> {
    (0..x.n_cols())
        .map(|j| {
            let col = x.col(j);
            let mut idx: Vec<u32> = (0..x.n_rows() as u32).collect();
            idx.sort_unstable_by(|&a, &b| {
                col[a as usize]
                    .partial_cmp(&col[b as usize])
                    .expect("finite feature value")
            });
            idx
        })
        .collect()
}

/// Grow a tree over all rows using presorted feature orders. Candidate
/// splits, tie-breaking and floating-point accumulation order match
/// [`grow_tree`]; this path just avoids re-sorting at every node, which
/// boosting would otherwise pay once per node per round.
pub(crate) fn grow_tree_presorted(
    x: &FeatureMatrix,
    grad: &[f64],
    hess: &[f64],
    sorted: &[Vec<u32>],
    params: &GrowParams,
    leaf_value: &impl Fn(f64, f64) -> f64,
) -> RegressionTree {
    let n = x.n_rows();
    assert!(n > 0, "cannot grow a tree on zero rows");
    let mut nodes: Vec<Node> = Vec::new();
    let mut assign: Vec<u32> = vec![0; n];

    struct Pending {
        node: usize,
        depth: usize,
        count: usize,
        g_sum: f64,
        h_sum: f64,
    }

    let g_root: f64 = grad.iter().sum();
    let h_root: f64 = hess.iter().sum();
    nodes.push(Node::Leaf {
        value: leaf_value(g_root, h_root),
        cover: n as f64,
        in_bag_rows: Vec::new(),
    });
    let mut queue = std::collections::VecDeque::new();
    queue.push_back(Pending {
        node: 0,
        depth: 0,
        count: n,
        g_sum: g_root,
        h_sum: h_root,
    });

    while let Some(p) = queue.pop_front() {
        let depth_ok = params.max_depth.is_none_or(|d| p.depth < d);
        if !depth_ok || p.count < 2 * params.min_leaf {
            continue;
        }
        let lambda = params.lambda;
        let parent_score = p.g_sum * p.g_sum / (p.h_sum + lambda);
        let min_gain = 1e-10 * parent_score.abs().max(1.0);

        let mut best: Option<BestSplit> = None;
        let node_id = p.node as u32;
        for (feature, order) in sorted.iter().enumerate() {
            let col = x.col(feature);
            let mut g_left = 0.0;
            let mut h_left = 0.0;
            let mut n_left = 0usize;
            let mut prev_value: Option<f64> = None;
            for &row in order {
                let row = row as usize;
                if assign[row] != node_id {
                    continue;
                }
                let value = col[row];
                if let Some(prev) = prev_value {
                    if value > prev
                        && n_left >= params.min_leaf
                        && p.count - n_left >= params.min_leaf
                    {
                        let g_right = p.g_sum - g_left;
                        let h_right = p.h_sum - h_left;
                        let gain = g_left * g_left / (h_left + lambda)
                            + g_right * g_right / (h_right + lambda)
                            - parent_score;
                        if gain > min_gain && best.as_ref().is_none_or(|b| gain > b.gain) {
                            best = Some(BestSplit {
                                feature,
                                threshold: 0.5 * (prev + value),
                                gain,
                                grad_left: g_left,
                                hess_left: h_left,
                                grad_right: g_right,
                                hess_right: h_right,
                            });
                        }
                    }
                }
                g_left += grad[row];
                h_left += hess[row];
                n_left += 1;
                prev_value = Some(value);
            }
        }

        let Some(s) = best else { continue };
        let left = nodes.len();
        let right = nodes.len() + 1;
        let col = x.col(s.feature);
        let mut n_left = 0usize;
        for (row, a) in assign.iter_mut().enumerate() {
            if *a == node_id {
                if col[row] < s.threshold {
                    *a = left as u32;
                    n_left += 1;
                } else {
                    *a = right as u32;
                }
            }
        }
        nodes[p.node] = Node::Split {
            feature: s.feature,
            threshold: s.threshold,
            left,
            right,
            cover: p.count as f64,
            stats: params.record_stats.then_some(SplitStats {
                grad_left: s.grad_left,
                hess_left: s.hess_left,
                grad_right: s.grad_right,
                hess_right: s.hess_right,
                gain: s.gain,
            }),
        };
        nodes.push(Node::Leaf {
            value: leaf_value(s.grad_left, s.hess_left),
            cover: n_left as f64,
            in_bag_rows: Vec::new(),
        });
        nodes.push(Node::Leaf {
            value: leaf_value(s.grad_right, s.hess_right),
            cover: (p.count - n_left) as f64,
            in_bag_rows: Vec::new(),
        });
        queue.push_back(Pending {
            node: left,
            depth: p.depth + 1,
            count: n_left,
            g_sum: s.grad_left,
            h_sum: s.hess_left,
        });
        queue.push_back(Pending {
            node: right,
            depth: p.depth + 1,
            count: p.count - n_left,
            g_sum: s.grad_right,
            h_sum: s.hess_right,
        });
    }
    RegressionTree { nodes }
}

/// Grow one tree on the given row multiset. `leaf_value` maps the node's
/// gradient/hessian sums to its output.
pub(crate) fn grow_tree(
    x: &FeatureMatrix,
    grad: &[f64],
    hess: &[f64],
    rows: Vec<usize>,
    params: &GrowParams,
    rng: Option<&mut ChaCha12Rng>,
    leaf_value: &impl Fn(f64, f64) -> f64,
) -> RegressionTree {
    assert!(!rows.is_empty(), "cannot grow a tree on zero rows");
    let mut grower = Grower {
        x,
        grad,
        hess,
        params,
        rng,
        nodes: Vec::new(),
        scratch: Vec::new(),
        feature_pool: Vec::new(),
    };
    grower.build(rows, 0, leaf_value);
    RegressionTree {
        nodes: grower.nodes,
    }
}
