use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use super::{load_csv, DatasetProfile, RawColumn, RawTable};
use crate::dataset::{ClassId, ColumnKind, ColumnarTable, FeatureColumn, LabelEncoding};
use crate::error::{Error, Result};

/// Output of [`encode_categoricals`]: the numeric table plus the code
/// assignment of every categorical feature column.
#[derive(Debug, Clone)]
pub struct EncodedTable {
    pub table: ColumnarTable,
    pub categorical: Vec<(String, LabelEncoding)>,
}

fn first_occurrence_codes(tokens: &[String]) -> (Vec<f64>, LabelEncoding) {
    let mut ids: HashMap<&str, usize> = HashMap::new();
    let mut names = Vec::new();
    let mut counts: Vec<u64> = Vec::new();
    let codes = tokens
        .iter()
        .map(|t| {
            let id = *ids.entry(t.as_str()).or_insert_with(|| {
                names.push(t.clone());
                counts.push(0);
                names.len() - 1
            });
            counts[id] += 1;
            id as f64
        })
        .collect();
    let encoding = LabelEncoding::new(names, counts).expect("tokens are distinct by construction");
    (codes, encoding)
}

/// Maps categorical columns to integer codes in order of first occurrence
/// and the label column to ids in the profile's class order. Classes are
/// never merged or binarized.
pub fn encode_categoricals(raw: &RawTable, profile: &DatasetProfile) -> Result<EncodedTable> {
    let label_idx = raw
        .position(&profile.label_column)
        .ok_or_else(|| Error::MissingColumn(profile.label_column.clone()))?;
    let class_index: HashMap<&str, ClassId> = profile
        .class_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i as ClassId))
        .collect();

    let labels: Vec<ClassId> = match raw.column(label_idx) {
        RawColumn::Categorical(tokens) => tokens
            .iter()
            .map(|t| {
                class_index
                    .get(profile.class_for(t))
                    .copied()
                    .ok_or_else(|| Error::UnknownLabel(t.clone()))
            })
            .collect::<Result<_>>()?,
        RawColumn::Numeric(_) => {
            return Err(Error::InvalidParameter(format!(
                "label column `{}` was read as numeric",
                profile.label_column
            )))
        }
    };

    let mut features = Vec::with_capacity(raw.n_columns() - 1);
    let mut categorical = Vec::new();
    for (j, schema) in raw.schema().iter().enumerate() {
        if j == label_idx {
            continue;
        }
        match raw.column(j) {
            RawColumn::Numeric(v) => {
                let kind = match schema.kind {
                    ColumnKind::Timestamp => ColumnKind::Timestamp,
                    _ => ColumnKind::Numeric,
                };
                features.push(FeatureColumn::new(
                    schema.name.clone(),
                    kind,
                    Arc::<[f64]>::from(v.as_slice()),
                ));
            }
            RawColumn::Categorical(tokens) => {
                let (codes, encoding) = first_occurrence_codes(tokens);
                features.push(FeatureColumn::new(schema.name.clone(), ColumnKind::Categorical, codes));
                categorical.push((schema.name.clone(), encoding));
            }
        }
    }
    let table = ColumnarTable::new(
        features,
        profile.label_column.clone(),
        labels,
        profile.class_names.clone(),
    )?;
    Ok(EncodedTable { table, categorical })
}

/// Loads an already-preprocessed CSV (numeric features, label as class
/// names) such as the train/test files written by the `ingest` command.
pub fn load_prepared_csv(path: impl AsRef<Path>, profile: &DatasetProfile) -> Result<ColumnarTable> {
    let raw = load_csv(path, profile)?;
    Ok(encode_categoricals(&raw, profile)?.table)
}
