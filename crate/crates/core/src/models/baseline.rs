use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{argmax_lowest, check_features, Classifier};
use crate::dataset::{ClassId, ColumnarTable};
use crate::error::{Error, Result};

/// Predicts the most frequent training class for every row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub majority_class: ClassId,
    pub train_ratio: f64,
    pub n_classes: usize,
    pub feature_count: usize,
}

pub fn majority_baseline(train: &ColumnarTable) -> Result<BaselineModel> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut counts = vec![0u64; train.n_classes()];
    for &y in train.labels() {
        counts[y as usize] += 1;
    }
    let majority_class = argmax_lowest(counts.iter().map(|&c| c as f64));
    Ok(BaselineModel {
        majority_class,
        train_ratio: counts[majority_class as usize] as f64 / train.n_rows() as f64,
        n_classes: train.n_classes(),
        feature_count: train.n_features(),
    })
}

pub fn predict_baseline(model: &BaselineModel, table: &ColumnarTable) -> Result<Vec<ClassId>> {
    model.predict(table)
}

impl Classifier for BaselineModel {
    fn feature_count(&self) -> usize {
        self.feature_count
    }

    fn predict(&self, table: &ColumnarTable) -> Result<Vec<ClassId>> {
        check_features(self.feature_count, table)?;
        Ok((0..table.n_rows())
            .into_par_iter()
            .map(|_| self.majority_class)
            .collect())
    }
}
