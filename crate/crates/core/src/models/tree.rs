//! CART decision tree with Gini impurity and exhaustive threshold search.

use std::cmp::Ordering;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{argmax_lowest, check_features, Classifier, TreeHyperparams};
use crate::dataset::{ClassId, ColumnarTable};
use crate::error::{Error, Result};

/// Gini impurity `1 - sum p_k^2` of a class-count vector.
pub fn gini_impurity(class_counts: &[u64]) -> Result<f64> {
    let total: u64 = class_counts.iter().sum();
    if total == 0 {
        return Err(Error::ZeroCounts);
    }
    let t = total as f64;
    Ok(1.0 - class_counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>())
}

/// Threshold between two consecutive distinct sorted values `lo < hi`.
///
/// The midpoint, unless rounding lands it on `hi`, in which case `lo`.
/// Either way `lo <= t < hi`.
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo / 2.0 + hi / 2.0;
    if lo <= m && m < hi {
        m
    } else {
        lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    pub impurity_decrease: f64,
}

/// Sum of squared counts over children, divided by child size, kept as an
/// exact fraction `num / den` so candidate splits compare without rounding.
#[derive(Debug, Clone, Copy)]
struct Purity {
    num: u128,
    den: u128,
}

impl Purity {
    fn of_children(sq_left: u128, n_left: u128, sq_right: u128, n_right: u128) -> Self {
        Purity {
            num: sq_left * n_right + sq_right * n_left,
            den: n_left * n_right,
        }
    }

    fn cmp(&self, other: &Purity) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

fn sum_sq(counts: &[u64]) -> u128 {
    counts.iter().map(|&c| u128::from(c) * u128::from(c)).sum()
}

/// Search state shared by every node of one fit.
pub(crate) struct SplitSearch<'a> {
    columns: Vec<&'a [f64]>,
    labels: &'a [ClassId],
    n_classes: usize,
    min_samples_leaf: usize,
    buf: Vec<(f64, ClassId)>,
}

impl<'a> SplitSearch<'a> {
    pub(crate) fn new(table: &'a ColumnarTable, min_samples_leaf: usize) -> Self {
        Self {
            columns: table.features().collect(),
            labels: table.labels(),
            n_classes: table.n_classes(),
            min_samples_leaf: min_samples_leaf.max(1),
            buf: Vec::new(),
        }
    }

    pub(crate) fn class_counts(&self, rows: &[usize]) -> Vec<u64> {
        let mut counts = vec![0u64; self.n_classes];
        for &r in rows {
            counts[self.labels[r] as usize] += 1;
        }
        counts
    }

    /// Best split of `rows` over `features` (ascending). Returns `None` when
    /// no legal threshold strictly lowers the weighted impurity.
    pub(crate) fn best(&mut self, rows: &[usize], features: &[usize]) -> Option<SplitCandidate> {
        self.search(rows, features, false)
    }

    /// As [`SplitSearch::best`], but when nothing strictly improves, falls
    /// back to the first legal threshold in (feature, threshold) order with
    /// zero decrease. Gini never rises under a split, so that candidate ties
    /// every other; growth uses it to get past XOR-like nodes.
    pub(crate) fn best_or_flat(&mut self, rows: &[usize], features: &[usize]) -> Option<SplitCandidate> {
        self.search(rows, features, true)
    }

    fn search(&mut self, rows: &[usize], features: &[usize], allow_flat: bool) -> Option<SplitCandidate> {
        let n = rows.len();
        if n < 2 {
            return None;
        }
        let parent = self.class_counts(rows);
        let parent_sq = sum_sq(&parent);
        let n128 = n as u128;
        let min_leaf = self.min_samples_leaf;
        // children must beat sum_sq(parent) / n
        let mut best: Option<(Purity, usize, f64)> = None;
        let mut first_legal: Option<(usize, f64)> = None;

        for &f in features {
            let col = self.columns[f];
            self.buf.clear();
            self.buf.extend(rows.iter().map(|&r| (col[r], self.labels[r])));
            self.buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

            let mut left = vec![0u64; self.n_classes];
            let mut right = parent.clone();
            let (mut sq_left, mut sq_right) = (0u128, parent_sq);
            for i in 0..n - 1 {
                let c = self.buf[i].1 as usize;
                sq_left += 2 * u128::from(left[c]) + 1;
                sq_right -= 2 * u128::from(right[c]) - 1;
                left[c] += 1;
                right[c] -= 1;

                let (lo, hi) = (self.buf[i].0, self.buf[i + 1].0);
                if lo >= hi {
                    continue;
                }
                let n_left = i + 1;
                let n_right = n - n_left;
                if n_left < min_leaf || n_right < min_leaf {
                    continue;
                }
                if first_legal.is_none() {
                    first_legal = Some((f, midpoint(lo, hi)));
                }
                let purity = Purity::of_children(sq_left, n_left as u128, sq_right, n_right as u128);
                let better = match &best {
                    None => purity.num * n128 > parent_sq * purity.den,
                    Some((b, _, _)) => purity.cmp(b) == Ordering::Greater,
                };
                if better {
                    best = Some((purity, f, midpoint(lo, hi)));
                }
            }
        }

        match best {
            Some((p, feature, threshold)) => {
                let score = p.num as f64 / p.den as f64;
                let nf = n as f64;
                Some(SplitCandidate {
                    feature,
                    threshold,
                    impurity_decrease: (score - parent_sq as f64 / nf) / nf,
                })
            }
            None if allow_flat => first_legal.map(|(feature, threshold)| SplitCandidate {
                feature,
                threshold,
                impurity_decrease: 0.0,
            }),
            None => None,
        }
    }

    pub(crate) fn partition(&self, rows: &[usize], feature: usize, threshold: f64) -> (Vec<usize>, Vec<usize>) {
        let col = self.columns[feature];
        rows.iter().partition(|&&r| col[r] <= threshold)
    }
}

/// Best Gini split of `rows` over all features of `table`, subject to
/// `params.min_samples_leaf` on both children.
///
/// Candidates are the midpoints between consecutive distinct values. Ties
/// go to the lowest feature index, then the lowest threshold.
pub fn best_split(rows: &[usize], table: &ColumnarTable, params: &TreeHyperparams) -> Option<SplitCandidate> {
    let features: Vec<usize> = (0..table.n_features()).collect();
    SplitSearch::new(table, params.min_samples_leaf).best(rows, &features)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TreeNode {
    /// Rows with `value <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Training counts reaching this node, kept for pruning.
        class_counts: Vec<u64>,
    },
    Leaf {
        class_counts: Vec<u64>,
    },
}

impl TreeNode {
    pub fn class_counts(&self) -> &[u64] {
        match self {
            TreeNode::Split { class_counts, .. } | TreeNode::Leaf { class_counts } => class_counts,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf { .. })
    }
}

/// Fitted tree stored as an arena; `nodes[0]` is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTreeModel {
    pub nodes: Vec<TreeNode>,
    pub params: TreeHyperparams,
    pub n_classes: usize,
    pub feature_count: usize,
}

impl DecisionTreeModel {
    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn n_leaves(&self) -> usize {
        self.reachable().filter(|&i| self.nodes[i].is_leaf()).count()
    }

    /// Length of the longest root-to-leaf path; a lone leaf has depth 0.
    pub fn depth(&self) -> usize {
        self.leaf_depths().map(|(_, d)| d).max().unwrap_or(0)
    }

    /// `(node index, depth)` of every leaf, left to right.
    pub fn leaf_depths(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let mut stack = vec![(0usize, 0usize)];
        std::iter::from_fn(move || {
            while let Some((i, d)) = stack.pop() {
                match &self.nodes[i] {
                    TreeNode::Leaf { .. } => return Some((i, d)),
                    TreeNode::Split { left, right, .. } => {
                        stack.push((*right, d + 1));
                        stack.push((*left, d + 1));
                    }
                }
            }
            None
        })
    }

    fn reachable(&self) -> impl Iterator<Item = usize> + '_ {
        let mut stack = vec![0usize];
        std::iter::from_fn(move || {
            let i = stack.pop()?;
            if let TreeNode::Split { left, right, .. } = &self.nodes[i] {
                stack.push(*right);
                stack.push(*left);
            }
            Some(i)
        })
    }

    /// Leaf reached by a feature vector.
    pub fn leaf_for(&self, row: impl Fn(usize) -> f64) -> &TreeNode {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if row(*feature) <= *threshold { *left } else { *right },
                leaf => return leaf,
            }
        }
    }

    pub fn predict_row(&self, row: impl Fn(usize) -> f64) -> ClassId {
        argmax_lowest(self.leaf_for(row).class_counts().iter().map(|&c| c as f64))
    }
}

impl Classifier for DecisionTreeModel {
    fn feature_count(&self) -> usize {
        self.feature_count
    }

    fn predict(&self, table: &ColumnarTable) -> Result<Vec<ClassId>> {
        check_features(self.feature_count, table)?;
        let cols: Vec<&[f64]> = table.features().collect();
        Ok((0..table.n_rows())
            .into_par_iter()
            .map(|r| self.predict_row(|f| cols[f][r]))
            .collect())
    }
}

/// Grows a tree on the rows `rows` of `table` (repeats allowed, as in a
/// bootstrap sample). With `features_per_split = Some(k)`, each node draws
/// `k` candidate features from a generator seeded with `params.seed`.
pub(crate) fn grow(
    table: &ColumnarTable,
    rows: Vec<usize>,
    params: &TreeHyperparams,
    features_per_split: Option<usize>,
) -> DecisionTreeModel {
    let d = table.n_features();
    let mut search = SplitSearch::new(table, params.min_samples_leaf);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let all_features: Vec<usize> = (0..d).collect();
    let max_depth = params.max_depth.unwrap_or(usize::MAX);

    let mut nodes = vec![TreeNode::Leaf {
        class_counts: Vec::new(),
    }];
    let mut stack = vec![(0usize, rows, 0usize)];
    while let Some((id, rows, depth)) = stack.pop() {
        let counts = search.class_counts(&rows);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let split = if depth >= max_depth || rows.len() < params.min_samples_split || pure {
            None
        } else {
            match features_per_split {
                Some(k) if k < d => {
                    let mut feats = sample(&mut rng, d, k).into_vec();
                    feats.sort_unstable();
                    search.best_or_flat(&rows, &feats)
                }
                _ => search.best_or_flat(&rows, &all_features),
            }
        };
        match split {
            None => nodes[id] = TreeNode::Leaf { class_counts: counts },
            Some(s) => {
                let (l_rows, r_rows) = search.partition(&rows, s.feature, s.threshold);
                let (left, right) = (nodes.len(), nodes.len() + 1);
                nodes.push(TreeNode::Leaf {
                    class_counts: Vec::new(),
                });
                nodes.push(TreeNode::Leaf {
                    class_counts: Vec::new(),
                });
                nodes[id] = TreeNode::Split {
                    feature: s.feature,
                    threshold: s.threshold,
                    left,
                    right,
                    class_counts: counts,
                };
                stack.push((right, r_rows, depth + 1));
                stack.push((left, l_rows, depth + 1));
            }
        }
    }

    let mut model = DecisionTreeModel {
        nodes,
        params: params.clone(),
        n_classes: table.n_classes(),
        feature_count: d,
    };
    if params.ccp_alpha > 0.0 {
        model = prune_cost_complexity(&model, params.ccp_alpha);
    }
    model
}

/// Fits a CART tree on every row of `train`.
pub fn fit_tree(train: &ColumnarTable, params: &TreeHyperparams) -> Result<DecisionTreeModel> {
    params.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if train.n_features() == 0 {
        return Err(Error::InvalidParameter("training table has no features".into()));
    }
    Ok(grow(train, (0..train.n_rows()).collect(), params, None))
}

pub fn predict_tree(model: &DecisionTreeModel, table: &ColumnarTable) -> Result<Vec<ClassId>> {
    model.predict(table)
}

/// Minimal cost-complexity pruning.
///
/// Node risk is `(n_t / N) * gini(t)`. The internal node with the smallest
/// effective alpha `(R(t) - R(T_t)) / (leaves(T_t) - 1)` is collapsed while
/// that alpha is at most `ccp_alpha`; ties go to the lowest node index.
pub fn prune_cost_complexity(model: &DecisionTreeModel, ccp_alpha: f64) -> DecisionTreeModel {
    let mut nodes = model.nodes.clone();
    let total: u64 = nodes[0].class_counts().iter().sum();
    let risk = |counts: &[u64]| {
        let n: u64 = counts.iter().sum();
        if n == 0 {
            0.0
        } else {
            n as f64 / total as f64 * gini_impurity(counts).unwrap_or(0.0)
        }
    };

    loop {
        // post-order subtree risk and leaf counts over the live tree
        let mut sub_risk = vec![0.0; nodes.len()];
        let mut sub_leaves = vec![0usize; nodes.len()];
        let mut order = Vec::new();
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            order.push(i);
            if let TreeNode::Split { left, right, .. } = &nodes[i] {
                stack.push(*left);
                stack.push(*right);
            }
        }
        let mut weakest: Option<(f64, usize)> = None;
        for &i in order.iter().rev() {
            match &nodes[i] {
                TreeNode::Leaf { class_counts } => {
                    sub_risk[i] = risk(class_counts);
                    sub_leaves[i] = 1;
                }
                TreeNode::Split {
                    left,
                    right,
                    class_counts,
                    ..
                } => {
                    sub_risk[i] = sub_risk[*left] + sub_risk[*right];
                    sub_leaves[i] = sub_leaves[*left] + sub_leaves[*right];
                    let alpha = (risk(class_counts) - sub_risk[i]) / (sub_leaves[i] - 1) as f64;
                    let replace = match weakest {
                        None => true,
                        Some((a, j)) => alpha < a || (alpha == a && i < j),
                    };
                    if replace {
                        weakest = Some((alpha, i));
                    }
                }
            }
        }
        match weakest {
            Some((alpha, i)) if alpha <= ccp_alpha => {
                let counts = nodes[i].class_counts().to_vec();
                nodes[i] = TreeNode::Leaf { class_counts: counts };
            }
            _ => break,
        }
    }

    DecisionTreeModel {
        nodes: compact(&nodes),
        ..model.clone()
    }
}

/// Drops unreachable nodes and renumbers the rest in depth-first order.
fn compact(nodes: &[TreeNode]) -> Vec<TreeNode> {
    let mut out: Vec<TreeNode> = Vec::new();
    let mut stack = vec![(0usize, None::<(usize, bool)>)];
    while let Some((old, parent)) = stack.pop() {
        let new = out.len();
        out.push(nodes[old].clone());
        if let Some((p, is_left)) = parent {
            if let TreeNode::Split { left, right, .. } = &mut out[p] {
                if is_left {
                    *left = new;
                } else {
                    *right = new;
                }
            }
        }
        if let TreeNode::Split { left, right, .. } = &nodes[old] {
            stack.push((*right, Some((new, false))));
            stack.push((*left, Some((new, true))));
        }
    }
    out
}
