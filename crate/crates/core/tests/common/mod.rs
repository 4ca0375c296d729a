//! Independent oracles shared by the integration tests and the acceptance
//! runner. Nothing here calls into the library's own search or metric code.
#![allow(dead_code)]

use std::collections::HashMap;

use flowgate_core::dataset::{ClassId, ColumnarTable, FeatureColumn};
use flowgate_core::models::{DecisionTreeModel, TreeHyperparams, TreeNode};
use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn names(k: usize) -> Vec<String> {
    (0..k).map(|c| format!("c{c}")).collect()
}

pub fn table(columns: Vec<Vec<f64>>, labels: Vec<ClassId>, k: usize) -> ColumnarTable {
    let features = columns
        .into_iter()
        .enumerate()
        .map(|(j, v)| FeatureColumn::numeric(format!("f{j}"), v))
        .collect();
    ColumnarTable::new(features, "label", labels, names(k)).unwrap()
}

/// Random table with small integer-valued features so ties are common.
pub fn random_table(rng: &mut ChaCha8Rng, n: usize, d: usize, k: usize, levels: i64) -> ColumnarTable {
    let columns = (0..d)
        .map(|_| (0..n).map(|_| rng.random_range(0..levels) as f64).collect())
        .collect();
    let labels = (0..n).map(|_| rng.random_range(0..k as u32)).collect();
    table(columns, labels, k)
}

/// Random table in which identical feature vectors always share a label.
pub fn conflict_free_table(rng: &mut ChaCha8Rng, n: usize, d: usize, k: usize) -> ColumnarTable {
    let mut seen: HashMap<Vec<u64>, ClassId> = HashMap::new();
    let mut columns = vec![Vec::with_capacity(n); d];
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..d).map(|_| rng.random_range(0..20) as f64 / 4.0).collect();
        let key: Vec<u64> = row.iter().map(|v| v.to_bits()).collect();
        let y = *seen.entry(key).or_insert_with(|| rng.random_range(0..k as u32));
        for (c, v) in columns.iter_mut().zip(row) {
            c.push(v);
        }
        labels.push(y);
    }
    table(columns, labels, k)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleMetrics {
    pub tp: Vec<u64>,
    pub fp: Vec<u64>,
    pub fn_: Vec<u64>,
    pub support: Vec<u64>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    pub accuracy: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
}

fn div(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Counts every statistic by scanning the pairs once per class.
pub fn metric_oracle(y_true: &[ClassId], y_pred: &[ClassId], k: usize) -> OracleMetrics {
    let n = y_true.len() as u64;
    let mut m = OracleMetrics {
        tp: vec![0; k],
        fp: vec![0; k],
        fn_: vec![0; k],
        support: vec![0; k],
        precision: vec![0.0; k],
        recall: vec![0.0; k],
        f1: vec![0.0; k],
        accuracy: 0.0,
        weighted_precision: 0.0,
        weighted_recall: 0.0,
        weighted_f1: 0.0,
    };
    let mut correct = 0u64;
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t == p {
            correct += 1;
        }
    }
    for c in 0..k as ClassId {
        let i = c as usize;
        for (&t, &p) in y_true.iter().zip(y_pred) {
            match (t == c, p == c) {
                (true, true) => m.tp[i] += 1,
                (false, true) => m.fp[i] += 1,
                (true, false) => m.fn_[i] += 1,
                _ => {}
            }
        }
        m.support[i] = m.tp[i] + m.fn_[i];
        m.precision[i] = div(m.tp[i], m.tp[i] + m.fp[i]);
        m.recall[i] = div(m.tp[i], m.tp[i] + m.fn_[i]);
        let (p, r) = (m.precision[i], m.recall[i]);
        m.f1[i] = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    }
    m.accuracy = div(correct, n);
    let w = |v: &[f64]| (0..k).map(|i| m.support[i] as f64 * v[i]).sum::<f64>() / n as f64;
    m.weighted_precision = w(&m.precision);
    m.weighted_recall = w(&m.recall);
    m.weighted_f1 = w(&m.f1);
    m
}

type Q = Ratio<i128>;

fn gini_q(counts: &[i128]) -> Q {
    let n: i128 = counts.iter().sum();
    let sq: i128 = counts.iter().map(|c| c * c).sum();
    Q::from_integer(1) - Q::new(sq, n * n)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSplit {
    pub feature: usize,
    pub threshold: f64,
    pub decrease: Q,
}

/// Exhaustive search: every feature, every pair of consecutive distinct
/// values, children recounted from scratch, impurities in exact rationals.
/// A split must strictly lower the weighted impurity; ties keep the
/// first candidate in (feature, threshold) order.
pub fn split_oracle(t: &ColumnarTable, rows: &[usize], min_leaf: usize, k: usize) -> Option<OracleSplit> {
    let n = rows.len() as i128;
    if n == 0 {
        return None;
    }
    let mut parent = vec![0i128; k];
    for &r in rows {
        parent[t.labels()[r] as usize] += 1;
    }
    let parent_gini = gini_q(&parent);
    let mut best: Option<OracleSplit> = None;
    for f in 0..t.n_features() {
        let col = t.feature(f);
        let mut values: Vec<f64> = rows.iter().map(|&r| col[r]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let mid = lo / 2.0 + hi / 2.0;
            let threshold = if lo <= mid && mid < hi { mid } else { lo };
            let mut left = vec![0i128; k];
            let mut right = vec![0i128; k];
            for &r in rows {
                let side = if col[r] <= threshold { &mut left } else { &mut right };
                side[t.labels()[r] as usize] += 1;
            }
            let (nl, nr): (i128, i128) = (left.iter().sum(), right.iter().sum());
            if (nl as usize) < min_leaf || (nr as usize) < min_leaf {
                continue;
            }
            let child = Q::new(nl, n) * gini_q(&left) + Q::new(nr, n) * gini_q(&right);
            let decrease = parent_gini - child;
            if decrease <= Q::from_integer(0) {
                continue;
            }
            if best.as_ref().is_none_or(|b| decrease > b.decrease) {
                best = Some(OracleSplit {
                    feature: f,
                    threshold,
                    decrease,
                });
            }
        }
    }
    best
}

pub fn q_to_f64(q: &Q) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}

/// Checks arena consistency, depth and leaf-size limits, and that every
/// split's counts are the sum of its children's. Returns a description of
/// the first violation.
pub fn check_tree_structure(model: &DecisionTreeModel, params: &TreeHyperparams, n_rows: usize) -> Result<(), String> {
    let total: u64 = model.root().class_counts().iter().sum();
    if total as usize != n_rows {
        return Err(format!("root holds {total} rows, expected {n_rows}"));
    }
    let mut stack = vec![(0usize, 0usize)];
    let mut visited = 0;
    while let Some((i, depth)) = stack.pop() {
        visited += 1;
        let node = model.nodes.get(i).ok_or(format!("dangling index {i}"))?;
        let size: u64 = node.class_counts().iter().sum();
        if let Some(max) = params.max_depth {
            if depth > max {
                return Err(format!("node {i} at depth {depth} exceeds {max}"));
            }
        }
        match node {
            TreeNode::Leaf { .. } => {
                // a root leaf holds every row however few there are
                if i != 0 && (size as usize) < params.min_samples_leaf {
                    return Err(format!("leaf {i} holds {size} rows"));
                }
            }
            TreeNode::Split {
                left,
                right,
                class_counts,
                ..
            } => {
                if (size as usize) < params.min_samples_split {
                    return Err(format!("split {i} holds only {size} rows"));
                }
                let l = model.nodes.get(*left).ok_or("bad left")?.class_counts();
                let r = model.nodes.get(*right).ok_or("bad right")?.class_counts();
                for c in 0..class_counts.len() {
                    if l[c] + r[c] != class_counts[c] {
                        return Err(format!("split {i}: child counts do not add up"));
                    }
                }
                stack.push((*left, depth + 1));
                stack.push((*right, depth + 1));
            }
        }
    }
    if visited != model.nodes.len() {
        return Err(format!("{} nodes unreachable", model.nodes.len() - visited));
    }
    Ok(())
}

/// Majority class of a two-class labelling with benign share `r`.
pub fn closed_form_baseline(r: f64) -> [f64; 4] {
    [r, r * r, r, 2.0 * r * r / (1.0 + r)]
}

pub fn sphere(p: &[i64]) -> flowgate_core::Result<f64> {
    Ok(-(p.iter().map(|&x| x * x).sum::<i64>() as f64))
}
