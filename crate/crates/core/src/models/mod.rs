//! Classifiers: CART tree, random forest, gradient-boosted trees and a
//! majority-class baseline, plus a versioned JSON model document.

mod baseline;
mod document;
mod forest;
mod gbt;
mod tree;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::dataset::{ClassId, ColumnarTable};
use crate::error::{Error, Result};

pub use baseline::{majority_baseline, predict_baseline, BaselineModel};
pub use document::{Model, ModelDocument, MODEL_FORMAT_VERSION};
pub use forest::{derive_seed, fit_forest, predict_forest, ForestModel, ForestParams};
pub use gbt::{fit_gbt, predict_gbt, GbtModel, GbtParams, RegressionNode, RegressionTree};
pub use tree::{
    best_split, fit_tree, gini_impurity, midpoint, predict_tree, prune_cost_complexity, DecisionTreeModel,
    SplitCandidate, TreeNode,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    #[default]
    Gini,
}

/// Decision-tree hyperparameters. `max_depth = None` grows until leaves are
/// pure or too small to split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct TreeHyperparams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub ccp_alpha: f64,
    pub criterion: Criterion,
    pub seed: u64,
}

impl Default for TreeHyperparams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            ccp_alpha: 0.0,
            criterion: Criterion::Gini,
            seed: 42,
        }
    }
}

impl TreeHyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.max_depth == Some(0) {
            return Err(Error::InvalidParameter("max_depth must be at least 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::InvalidParameter("min_samples_split must be at least 2".into()));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::InvalidParameter("min_samples_leaf must be at least 1".into()));
        }
        if !(self.ccp_alpha >= 0.0 && self.ccp_alpha.is_finite()) {
            return Err(Error::InvalidParameter("ccp_alpha must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Anything that maps a feature table to class ids.
pub trait Classifier: Sync {
    fn feature_count(&self) -> usize;
    fn predict(&self, table: &ColumnarTable) -> Result<Vec<ClassId>>;
}

pub(crate) fn check_features(expected: usize, table: &ColumnarTable) -> Result<()> {
    if table.n_features() != expected {
        return Err(Error::FeatureMismatch {
            expected,
            found: table.n_features(),
        });
    }
    Ok(())
}

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax_lowest(values: impl IntoIterator<Item = f64>) -> ClassId {
    let mut best = (0usize, f64::NEG_INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0 as ClassId
}
