use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BaselineModel, Classifier, DecisionTreeModel, ForestModel, GbtModel};
use crate::dataset::{ClassId, ColumnarTable};
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    DecisionTree(DecisionTreeModel),
    Forest(ForestModel),
    Gbt(GbtModel),
    Baseline(BaselineModel),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::DecisionTree(_) => "decision_tree",
            Model::Forest(_) => "forest",
            Model::Gbt(_) => "gbt",
            Model::Baseline(_) => "baseline",
        }
    }

    fn inner(&self) -> &dyn Classifier {
        match self {
            Model::DecisionTree(m) => m,
            Model::Forest(m) => m,
            Model::Gbt(m) => m,
            Model::Baseline(m) => m,
        }
    }
}

impl Classifier for Model {
    fn feature_count(&self) -> usize {
        self.inner().feature_count()
    }

    fn predict(&self, table: &ColumnarTable) -> Result<Vec<ClassId>> {
        self.inner().predict(table)
    }
}

/// On-disk form of a trained model. Floats are written with shortest
/// round-trip formatting, so thresholds reload bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: u32,
    pub class_names: Vec<String>,
    pub feature_names: Vec<String>,
    pub model: Model,
}

impl ModelDocument {
    pub fn new(model: Model, train: &ColumnarTable) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            class_names: train.class_names().to_vec(),
            feature_names: train.feature_names().iter().map(|s| s.to_string()).collect(),
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            format_version: u32,
        }
        let header: Header = serde_json::from_str(text)?;
        if header.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelVersion(header.format_version));
        }
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Predicts after checking that `table` carries the training features
    /// in the training order.
    pub fn predict(&self, table: &ColumnarTable) -> Result<Vec<ClassId>> {
        if !table.feature_names().iter().eq(self.feature_names.iter()) {
            return Err(Error::FeatureMismatch {
                expected: self.feature_names.len(),
                found: table.n_features(),
            });
        }
        self.model.predict(table)
    }
}
