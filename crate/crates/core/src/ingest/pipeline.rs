use std::path::Path;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::{
    drop_columns_by_name, drop_duplicate_rows, drop_invalid_rows, drop_zero_variance_columns, encode_categoricals,
    load_csv, merge_timestamps, stratified_split, DatasetProfile, FitScope, NormalizationStats, PrepReport, RawTable,
    SplitPair, StageRecord,
};
use crate::dataset::{ColumnarTable, LabelEncoding};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct PipelineOptions {
    pub fit_scope: FitScope,
    pub split_ratio: f64,
    pub seed: u64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            fit_scope: FitScope::FullDataset,
            split_ratio: 0.8,
            seed: 42,
        }
    }
}

/// Everything the preprocessing chain produces.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub split: SplitPair,
    pub report: PrepReport,
    pub stats: NormalizationStats,
    /// Encoded table before normalization and splitting.
    pub cleaned: ColumnarTable,
    pub categorical: Vec<(String, LabelEncoding)>,
}

fn table_record(stage: &str, before: &ColumnarTable, after: &ColumnarTable, details: String) -> StageRecord {
    StageRecord {
        stage: stage.to_string(),
        rows_before: before.n_rows(),
        rows_after: after.n_rows(),
        columns_before: before.n_features() + 1,
        columns_after: after.n_features() + 1,
        removed_columns: Vec::new(),
        details,
    }
}

/// Runs every stage after loading, in the fixed order: merge timestamps,
/// drop named columns, drop invalid rows, drop duplicates, drop constant
/// columns, encode, normalize, split. With [`FitScope::TrainOnly`] the
/// split happens first and normalization is fitted on the training rows.
pub fn preprocess_raw(raw: &RawTable, profile: &DatasetProfile, options: &PipelineOptions) -> Result<Prepared> {
    let mut report = PrepReport::default();

    let merged = merge_timestamps(raw, profile).map_err(|e| e.in_stage("merge_timestamps"))?;
    let details = if profile.timestamp_merge.is_some() {
        "merged start/end calendar components"
    } else {
        "no merge rule"
    };
    report.push(StageRecord::between("merge_timestamps", raw, &merged, details.into()));

    let (named, rec) = drop_columns_by_name(&merged, profile).map_err(|e| e.in_stage("drop_columns_by_name"))?;
    report.push(rec);

    let (valid, rec) = drop_invalid_rows(&named);
    report.push(rec);

    let (unique, rec) = drop_duplicate_rows(&valid);
    report.push(rec);

    let (pruned, mut rec) = drop_zero_variance_columns(&unique);
    let missed: Vec<&str> = profile
        .zero_columns_expected
        .iter()
        .filter(|n| pruned.position(n).is_some())
        .map(String::as_str)
        .collect();
    if !missed.is_empty() {
        rec.details
            .push_str(&format!("; expected constant but varying: {}", missed.join(", ")));
    }
    report.push(rec);

    let encoded = encode_categoricals(&pruned, profile).map_err(|e| e.in_stage("encode_categoricals"))?;
    let cleaned = encoded.table;
    report.push(StageRecord {
        stage: "encode_categoricals".into(),
        rows_before: pruned.n_rows(),
        rows_after: cleaned.n_rows(),
        columns_before: pruned.n_columns(),
        columns_after: cleaned.n_features() + 1,
        removed_columns: Vec::new(),
        details: format!(
            "{} categorical columns encoded, {} classes",
            encoded.categorical.len(),
            cleaned.n_classes()
        ),
    });

    let (split, stats) = match options.fit_scope {
        FitScope::FullDataset => {
            let stats =
                NormalizationStats::fit(&cleaned, FitScope::FullDataset).map_err(|e| e.in_stage("minmax_normalize"))?;
            let normalized = stats.apply(&cleaned).map_err(|e| e.in_stage("minmax_normalize"))?;
            report.push(table_record(
                "minmax_normalize",
                &cleaned,
                &normalized,
                "fit scope full_dataset".into(),
            ));
            let split = stratified_split(&normalized, options.split_ratio, options.seed)
                .map_err(|e| e.in_stage("stratified_split"))?;
            report.push(split_record(&normalized, &split));
            (split, stats)
        }
        FitScope::TrainOnly => {
            let raw_split = stratified_split(&cleaned, options.split_ratio, options.seed)
                .map_err(|e| e.in_stage("stratified_split"))?;
            report.push(split_record(&cleaned, &raw_split));
            let stats = NormalizationStats::fit(&raw_split.train, FitScope::TrainOnly)
                .map_err(|e| e.in_stage("minmax_normalize"))?;
            let train = stats
                .apply(&raw_split.train)
                .map_err(|e| e.in_stage("minmax_normalize"))?;
            let test = stats
                .apply(&raw_split.test)
                .map_err(|e| e.in_stage("minmax_normalize"))?;
            report.push(table_record(
                "minmax_normalize",
                &cleaned,
                &cleaned,
                "fit scope train_only; test values may fall outside [0, 1]".into(),
            ));
            (
                SplitPair {
                    train,
                    test,
                    ..raw_split
                },
                stats,
            )
        }
    };

    Ok(Prepared {
        split,
        report,
        stats,
        cleaned,
        categorical: encoded.categorical,
    })
}

fn split_record(table: &ColumnarTable, split: &SplitPair) -> StageRecord {
    table_record(
        "stratified_split",
        table,
        table,
        format!(
            "ratio {} seed {}: train {} / test {}",
            split.ratio,
            split.seed,
            split.train.n_rows(),
            split.test.n_rows()
        ),
    )
}

/// Loads `path` and runs [`preprocess_raw`] on it.
pub fn preprocess_pipeline(
    path: impl AsRef<Path>,
    profile: &DatasetProfile,
    options: &PipelineOptions,
) -> Result<Prepared> {
    profile.validate()?;
    let raw = load_csv(path.as_ref(), profile).map_err(|e: Error| e.in_stage("load_csv"))?;
    let mut prepared = preprocess_raw(&raw, profile, options)?;
    prepared.report.stages.insert(
        0,
        StageRecord::between("load_csv", &raw, &raw, format!("{}", path.as_ref().display())),
    );
    Ok(prepared)
}
