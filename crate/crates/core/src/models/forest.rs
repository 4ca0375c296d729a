use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::tree::grow;
use super::{argmax_lowest, check_features, Classifier, DecisionTreeModel, TreeHyperparams};
use crate::dataset::{ClassId, ColumnarTable};
use crate::error::{Error, Result};

/// Independent 64-bit stream seed for task `index` under `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    // splitmix64 finalizer over a golden-ratio stride
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub tree: TreeHyperparams,
    /// Candidate features per split; `None` means `ceil(sqrt(d))`.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            tree: TreeHyperparams::default(),
            features_per_split: None,
            bootstrap: true,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<DecisionTreeModel>,
    pub n_trees: usize,
    pub bootstrap: bool,
    pub features_per_split: usize,
    pub seed: u64,
    pub n_classes: usize,
    pub feature_count: usize,
}

pub fn fit_forest(train: &ColumnarTable, params: &ForestParams) -> Result<ForestModel> {
    params.tree.validate()?;
    if params.n_trees == 0 {
        return Err(Error::InvalidParameter("n_trees must be at least 1".into()));
    }
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let d = train.n_features();
    if d == 0 {
        return Err(Error::InvalidParameter("training table has no features".into()));
    }
    let k = params
        .features_per_split
        .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize);
    if k == 0 || k > d {
        return Err(Error::InvalidParameter(format!(
            "features_per_split must be in 1..={d}, got {k}"
        )));
    }

    let n = train.n_rows();
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let seed = derive_seed(params.seed, t as u64);
            let rows: Vec<usize> = if params.bootstrap {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let tree_params = TreeHyperparams {
                seed: derive_seed(seed, 0),
                ..params.tree.clone()
            };
            grow(train, rows, &tree_params, Some(k))
        })
        .collect();

    Ok(ForestModel {
        trees,
        n_trees: params.n_trees,
        bootstrap: params.bootstrap,
        features_per_split: k,
        seed: params.seed,
        n_classes: train.n_classes(),
        feature_count: d,
    })
}

pub fn predict_forest(model: &ForestModel, table: &ColumnarTable) -> Result<Vec<ClassId>> {
    model.predict(table)
}

impl Classifier for ForestModel {
    fn feature_count(&self) -> usize {
        self.feature_count
    }

    fn predict(&self, table: &ColumnarTable) -> Result<Vec<ClassId>> {
        check_features(self.feature_count, table)?;
        let cols: Vec<&[f64]> = table.features().collect();
        Ok((0..table.n_rows())
            .into_par_iter()
            .map(|r| {
                let mut votes = vec![0u32; self.n_classes];
                for tree in &self.trees {
                    votes[tree.predict_row(|f| cols[f][r]) as usize] += 1;
                }
                argmax_lowest(votes.iter().map(|&v| f64::from(v)))
            })
            .collect())
    }
}
