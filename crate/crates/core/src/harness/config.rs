use std::path::{Path, PathBuf};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::epso::{EpsoConfig, SearchSpace};
use crate::error::{Error, Result};
use crate::ingest::FitScope;
use crate::metrics::AverageMode;
use crate::models::{ForestParams, GbtParams, TreeHyperparams};
use crate::synth::CorruptionSpec;

/// Where the experiment's rows come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    /// A flow CSV read with a built-in profile name or a profile JSON path.
    Csv { path: PathBuf, profile: String },
    /// Generated rows at a preset's class ratios, optionally corrupted.
    Synth {
        /// `cse2018` or `litnet2020`.
        preset: String,
        n_rows: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_features: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cluster_separation: Option<f64>,
        /// The corruption seed is derived from the experiment seed.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        corruption: Option<CorruptionSpec>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub fit_scope: FitScope,
    pub split_ratio: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            fit_scope: FitScope::FullDataset,
            split_ratio: 0.8,
        }
    }
}

/// A classifier to train and evaluate. Model seeds are replaced by the
/// experiment seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    DecisionTree {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        #[serde(default)]
        params: TreeHyperparams,
    },
    Forest {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        #[serde(default)]
        params: ForestParams,
    },
    Gbt {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        #[serde(default)]
        params: GbtParams,
    },
    Baseline {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
}

impl ModelSpec {
    pub fn display_name(&self) -> String {
        let (name, default) = match self {
            ModelSpec::DecisionTree { name, .. } => (name, "DT"),
            ModelSpec::Forest { name, .. } => (name, "RF"),
            ModelSpec::Gbt { name, .. } => (name, "XGBoost"),
            ModelSpec::Baseline { name } => (name, "Majority"),
        };
        name.clone().unwrap_or_else(|| default.to_string())
    }
}

fn default_holdout() -> f64 {
    0.3
}

fn default_true() -> bool {
    true
}

fn default_tuned_name() -> String {
    "EPSO DT".to_string()
}

/// Decision-tree tuning by particle swarm on a holdout carved from the
/// training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct TuningConfig {
    #[serde(default)]
    pub epso: EpsoConfig,
    #[serde(default = "SearchSpace::decision_tree")]
    pub space: SearchSpace,
    #[serde(default = "default_holdout")]
    pub holdout_fraction: f64,
    /// Start one particle at the default tree parameters.
    #[serde(default = "default_true")]
    pub seed_default: bool,
    #[serde(default = "default_tuned_name")]
    pub name: String,
}

impl Default for TuningConfig {
    fn default() -> Self {
        Self {
            epso: EpsoConfig::default(),
            space: SearchSpace::decision_tree(),
            holdout_fraction: default_holdout(),
            seed_default: true,
            name: default_tuned_name(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
    Md,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
            ReportFormat::Md => "md",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            "md" => Ok(Self::Md),
            _ => Err(Error::InvalidParameter(format!("unknown report format `{s}`"))),
        }
    }
}

fn default_formats() -> Vec<ReportFormat> {
    vec![ReportFormat::Csv]
}

fn default_name() -> String {
    "experiment".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    /// Master seed for generation, splitting, models and tuning.
    pub seed: u64,
    pub dataset: DatasetSource,
    #[serde(default)]
    pub preprocessing: PreprocessConfig,
    #[serde(default)]
    pub models: Vec<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tuning: Option<TuningConfig>,
    #[serde(default)]
    pub average: AverageMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<ReportFormat>,
    /// Worker cap; falls back to `FLOWGATE_THREADS`, then all cores.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() && self.tuning.is_none() {
            return Err(Error::InvalidParameter(
                "config needs at least one model or a tuning block".into(),
            ));
        }
        let r = self.preprocessing.split_ratio;
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "split_ratio must be in (0, 1), got {r}"
            )));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidParameter("threads must be at least 1".into()));
        }
        for m in &self.models {
            match m {
                ModelSpec::DecisionTree { params, .. } => params.validate()?,
                ModelSpec::Forest { params, .. } => params.tree.validate()?,
                ModelSpec::Gbt { params, .. } => params.validate()?,
                ModelSpec::Baseline { .. } => {}
            }
        }
        if let Some(t) = &self.tuning {
            if !(t.holdout_fraction > 0.0 && t.holdout_fraction < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "holdout_fraction must be in (0, 1), got {}",
                    t.holdout_fraction
                )));
            }
            t.epso.validate(&t.space)?;
        }
        Ok(())
    }

    /// Hex SHA-256 of the config's canonical JSON.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    /// JSON Schema for the config document.
    pub fn json_schema() -> String {
        let schema = schemars::schema_for!(ExperimentConfig);
        serde_json::to_string_pretty(&schema).expect("schema serializes") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "seed": 7,
        "dataset": {"source": "synth", "preset": "cse2018", "n_rows": 2000},
        "models": [{"kind": "decision_tree"}]
    }"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.preprocessing.split_ratio, 0.8);
        assert_eq!(c.formats, vec![ReportFormat::Csv]);
        assert_eq!(c.models[0].display_name(), "DT");
    }

    #[test]
    fn seed_is_mandatory() {
        let text = MINIMAL.replace("\"seed\": 7,", "");
        assert!(ExperimentConfig::from_json(&text).is_err());
    }

    #[test]
    fn empty_plan_rejected() {
        let text = MINIMAL.replace(r#"[{"kind": "decision_tree"}]"#, "[]");
        assert!(matches!(
            ExperimentConfig::from_json(&text),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = MINIMAL.replace("\"seed\": 7,", "\"seed\": 7, \"sede\": 1,");
        assert!(ExperimentConfig::from_json(&text).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::from_json(MINIMAL).unwrap();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 8;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
