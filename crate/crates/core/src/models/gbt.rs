//! Second-order gradient boosting with a softmax objective: one regression
//! tree per class per round, leaf weight `-G / (H + lambda)`.

use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::tree::midpoint;
use super::{argmax_lowest, check_features, Classifier};
use crate::dataset::{ClassId, ColumnarTable};
use crate::error::{Error, Result};

/// Floor applied to class priors so `ln(prior)` stays finite.
const PRIOR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct GbtParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub lambda: f64,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self {
            n_rounds: 20,
            learning_rate: 0.3,
            max_depth: 6,
            lambda: 1.0,
        }
    }
}

impl GbtParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_rounds == 0 {
            return Err(Error::InvalidParameter("n_rounds must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.learning_rate) {
            return Err(Error::InvalidParameter("learning_rate must be in [0, 1]".into()));
        }
        if self.max_depth == 0 {
            return Err(Error::InvalidParameter("max_depth must be at least 1".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter("lambda must be finite and >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RegressionNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<RegressionNode>,
}

impl RegressionTree {
    pub fn value(&self, row: impl Fn(usize) -> f64) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                RegressionNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row(*feature) <= *threshold { *left } else { *right },
                RegressionNode::Leaf { value } => return *value,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    /// `rounds[r][c]` is the tree for class `c` in round `r`.
    pub rounds: Vec<Vec<RegressionTree>>,
    pub base_score: Vec<f64>,
    pub learning_rate: f64,
    pub n_rounds: usize,
    pub max_depth: usize,
    pub lambda: f64,
    pub n_classes: usize,
    pub feature_count: usize,
}

impl GbtModel {
    /// Raw additive class scores for one row.
    pub fn scores_row(&self, row: impl Fn(usize) -> f64 + Copy) -> Vec<f64> {
        let mut s = self.base_score.clone();
        for round in &self.rounds {
            for (c, tree) in round.iter().enumerate() {
                s[c] += self.learning_rate * tree.value(row);
            }
        }
        s
    }

    pub fn predict_scores(&self, table: &ColumnarTable) -> Result<Vec<Vec<f64>>> {
        check_features(self.feature_count, table)?;
        let cols: Vec<&[f64]> = table.features().collect();
        Ok((0..table.n_rows())
            .into_par_iter()
            .map(|r| self.scores_row(|f| cols[f][r]))
            .collect())
    }
}

impl Classifier for GbtModel {
    fn feature_count(&self) -> usize {
        self.feature_count
    }

    fn predict(&self, table: &ColumnarTable) -> Result<Vec<ClassId>> {
        Ok(self.predict_scores(table)?.into_iter().map(argmax_lowest).collect())
    }
}

pub fn predict_gbt(model: &GbtModel, table: &ColumnarTable) -> Result<Vec<ClassId>> {
    model.predict(table)
}

fn softmax_into(scores: &[f64], out: &mut [f64]) {
    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for (o, &s) in out.iter_mut().zip(scores) {
        *o = (s - m).exp();
        z += *o;
    }
    for o in out.iter_mut() {
        *o /= z;
    }
}

/// Exact greedy tree growth over presorted columns, one level at a time:
/// each level costs one linear pass per feature regardless of node count.
struct Grower<'a> {
    columns: &'a [&'a [f64]],
    /// Row ids of each feature in ascending value order.
    sorted: &'a [Vec<u32>],
    grad: &'a [f64],
    hess: &'a [f64],
    lambda: f64,
    max_depth: usize,
}

const NO_SLOT: usize = usize::MAX;

#[derive(Clone, Copy)]
struct Frontier {
    node: usize,
    g: f64,
    h: f64,
    rows: usize,
}

#[derive(Clone, Copy)]
struct ScanState {
    g_left: f64,
    h_left: f64,
    last: f64,
    seen: bool,
    best_gain: f64,
    best: Option<(usize, f64)>,
}

impl Grower<'_> {
    fn leaf_value(&self, g: f64, h: f64) -> f64 {
        let denom = h + self.lambda;
        if denom > 0.0 {
            -g / denom
        } else {
            0.0
        }
    }

    fn score(&self, g: f64, h: f64) -> f64 {
        let denom = h + self.lambda;
        if denom > 0.0 {
            g * g / denom
        } else {
            0.0
        }
    }

    fn grow(&self, n_rows: usize) -> RegressionTree {
        let mut nodes = vec![RegressionNode::Leaf { value: 0.0 }];
        let mut node_of = vec![0usize; n_rows];
        let (g, h) = (0..n_rows).fold((0.0, 0.0), |(g, h), r| (g + self.grad[r], h + self.hess[r]));
        let mut frontier = vec![Frontier {
            node: 0,
            g,
            h,
            rows: n_rows,
        }];

        for _ in 0..self.max_depth {
            let mut slot_of = vec![NO_SLOT; nodes.len()];
            for (s, f) in frontier.iter().enumerate() {
                if f.rows >= 2 {
                    slot_of[f.node] = s;
                }
            }
            let parent_score: Vec<f64> = frontier.iter().map(|f| self.score(f.g, f.h)).collect();
            let fresh = ScanState {
                g_left: 0.0,
                h_left: 0.0,
                last: 0.0,
                seen: false,
                best_gain: 0.0,
                best: None,
            };
            let mut best: Vec<(f64, Option<(usize, f64)>)> = vec![(0.0, None); frontier.len()];
            for (feature, order) in self.sorted.iter().enumerate() {
                let col = self.columns[feature];
                let mut state = vec![fresh; frontier.len()];
                for (st, b) in state.iter_mut().zip(&best) {
                    st.best_gain = b.0;
                    st.best = b.1;
                }
                for &r in order {
                    let r = r as usize;
                    let s = slot_of[node_of[r]];
                    if s == NO_SLOT {
                        continue;
                    }
                    let v = col[r];
                    let st = &mut state[s];
                    if st.seen && st.last < v {
                        let fr = &frontier[s];
                        let gain = self.score(st.g_left, st.h_left) + self.score(fr.g - st.g_left, fr.h - st.h_left)
                            - parent_score[s];
                        if gain > st.best_gain {
                            st.best_gain = gain;
                            st.best = Some((feature, midpoint(st.last, v)));
                        }
                    }
                    st.g_left += self.grad[r];
                    st.h_left += self.hess[r];
                    st.last = v;
                    st.seen = true;
                }
                for (b, st) in best.iter_mut().zip(&state) {
                    *b = (st.best_gain, st.best);
                }
            }

            // apply splits; children get stats summed in row order
            let mut split_of: Vec<Option<(usize, f64, usize)>> = vec![None; nodes.len()];
            for (s, f) in frontier.iter().enumerate() {
                if let (_, Some((feature, threshold))) = best[s] {
                    let left = nodes.len();
                    nodes.push(RegressionNode::Leaf { value: 0.0 });
                    nodes.push(RegressionNode::Leaf { value: 0.0 });
                    nodes[f.node] = RegressionNode::Split {
                        feature,
                        threshold,
                        left,
                        right: left + 1,
                    };
                    split_of[f.node] = Some((feature, threshold, left));
                } else {
                    nodes[f.node] = RegressionNode::Leaf {
                        value: self.leaf_value(f.g, f.h),
                    };
                }
            }
            let mut stats = vec![(0.0f64, 0.0f64, 0usize); nodes.len()];
            let mut any = false;
            for (r, node) in node_of.iter_mut().enumerate() {
                if let Some((feature, threshold, left)) = split_of.get(*node).copied().flatten() {
                    *node = if self.columns[feature][r] <= threshold {
                        left
                    } else {
                        left + 1
                    };
                    let e = &mut stats[*node];
                    e.0 += self.grad[r];
                    e.1 += self.hess[r];
                    e.2 += 1;
                    any = true;
                }
            }
            if !any {
                frontier.clear();
                break;
            }
            frontier = split_of
                .iter()
                .flatten()
                .flat_map(|&(_, _, left)| [left, left + 1])
                .map(|node| Frontier {
                    node,
                    g: stats[node].0,
                    h: stats[node].1,
                    rows: stats[node].2,
                })
                .collect();
        }
        for f in frontier {
            nodes[f.node] = RegressionNode::Leaf {
                value: self.leaf_value(f.g, f.h),
            };
        }
        RegressionTree { nodes }
    }
}

/// Row ids of every column sorted by value, ties by row id.
fn presort(columns: &[&[f64]]) -> Vec<Vec<u32>> {
    columns
        .par_iter()
        .map(|col| {
            let mut order: Vec<u32> = (0..col.len() as u32).collect();
            order.sort_unstable_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
            order
        })
        .collect()
}

pub fn fit_gbt(train: &ColumnarTable, params: &GbtParams) -> Result<GbtModel> {
    params.validate()?;
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if train.n_features() == 0 {
        return Err(Error::InvalidParameter("training table has no features".into()));
    }
    let n = train.n_rows();
    let k = train.n_classes();
    let labels = train.labels();
    let columns: Vec<&[f64]> = train.features().collect();
    let sorted = presort(&columns);

    let mut counts = vec![0u64; k];
    for &y in labels {
        counts[y as usize] += 1;
    }
    let base_score: Vec<f64> = counts
        .iter()
        .map(|&c| (c as f64 / n as f64).max(PRIOR_FLOOR).ln())
        .collect();

    // row-major scores, n x k
    let mut scores: Vec<f64> = (0..n).flat_map(|_| base_score.iter().copied()).collect();
    let mut probs = vec![0.0; n * k];
    let mut rounds = Vec::with_capacity(params.n_rounds);
    for _ in 0..params.n_rounds {
        probs
            .par_chunks_mut(k)
            .zip(scores.par_chunks(k))
            .for_each(|(p, s)| softmax_into(s, p));
        let trees: Vec<RegressionTree> = (0..k)
            .into_par_iter()
            .map(|c| {
                let grad: Vec<f64> = (0..n)
                    .map(|r| probs[r * k + c] - f64::from(u8::from(labels[r] as usize == c)))
                    .collect();
                let hess: Vec<f64> = (0..n)
                    .map(|r| {
                        let p = probs[r * k + c];
                        p * (1.0 - p)
                    })
                    .collect();
                Grower {
                    columns: &columns,
                    sorted: &sorted,
                    grad: &grad,
                    hess: &hess,
                    lambda: params.lambda,
                    max_depth: params.max_depth,
                }
                .grow(n)
            })
            .collect();
        scores.par_chunks_mut(k).enumerate().for_each(|(r, s)| {
            for (c, tree) in trees.iter().enumerate() {
                s[c] += params.learning_rate * tree.value(|f| columns[f][r]);
            }
        });
        rounds.push(trees);
    }

    Ok(GbtModel {
        rounds,
        base_score,
        learning_rate: params.learning_rate,
        n_rounds: params.n_rounds,
        max_depth: params.max_depth,
        lambda: params.lambda,
        n_classes: k,
        feature_count: train.n_features(),
    })
}
