use std::sync::Arc;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::dataset::ColumnarTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum FitScope {
    /// Fit on the whole cleaned table, then split.
    #[default]
    FullDataset,
    /// Split first, fit on the training rows only.
    TrainOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureRange {
    pub min: f64,
    pub max: f64,
}

/// Per-feature `(min, max)` used by min-max scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub features: Vec<(String, FeatureRange)>,
    pub fit_scope: FitScope,
}

impl NormalizationStats {
    pub fn fit(table: &ColumnarTable, fit_scope: FitScope) -> Result<Self> {
        if table.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let features = table
            .feature_schema()
            .iter()
            .zip(table.features())
            .map(|(s, col)| {
                let (min, max) = col.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                });
                (s.name.clone(), FeatureRange { min, max })
            })
            .collect();
        Ok(Self { features, fit_scope })
    }

    /// Scales every feature with `(x - min) / (max - min)`. A feature with
    /// `max == min` maps to 0.
    pub fn apply(&self, table: &ColumnarTable) -> Result<ColumnarTable> {
        let names = table.feature_names();
        if names.len() != self.features.len() || names.iter().zip(&self.features).any(|(a, (b, _))| *a != b) {
            return Err(Error::StatsMismatch(format!(
                "stats cover [{}], table has [{}]",
                self.features
                    .iter()
                    .map(|(n, _)| n.as_str())
                    .collect::<Vec<_>>()
                    .join(", "),
                names.join(", ")
            )));
        }
        let columns: Vec<Arc<[f64]>> = table
            .features()
            .zip(&self.features)
            .map(|(col, (_, r))| {
                let span = r.max - r.min;
                if span > 0.0 {
                    col.iter().map(|&x| (x - r.min) / span).collect()
                } else {
                    col.iter().map(|_| 0.0).collect()
                }
            })
            .collect();
        table.with_feature_values(columns)
    }
}

/// Min-max scales `table`, fitting stats on it first when none are given.
pub fn minmax_normalize(
    table: &ColumnarTable,
    stats: Option<&NormalizationStats>,
) -> Result<(ColumnarTable, NormalizationStats)> {
    let stats = match stats {
        Some(s) => s.clone(),
        None => NormalizationStats::fit(table, FitScope::FullDataset)?,
    };
    let out = stats.apply(table)?;
    Ok((out, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FeatureColumn;

    fn table(cols: &[(&str, &[f64])]) -> ColumnarTable {
        let n = cols[0].1.len();
        ColumnarTable::new(
            cols.iter()
                .map(|(n, v)| FeatureColumn::numeric(*n, v.to_vec()))
                .collect(),
            "label",
            vec![0; n],
            vec!["a".into()],
        )
        .unwrap()
    }

    #[test]
    fn endpoints_midpoint_and_constant() {
        let t = table(&[("x", &[0.0, 5.0, 10.0]), ("c", &[7.0, 7.0, 7.0])]);
        let (out, stats) = minmax_normalize(&t, None).unwrap();
        assert_eq!(out.feature(0), &[0.0, 0.5, 1.0]);
        assert_eq!(out.feature(1), &[0.0, 0.0, 0.0]);
        assert_eq!(stats.features[0].1, FeatureRange { min: 0.0, max: 10.0 });
        assert_eq!(stats.fit_scope, FitScope::FullDataset);
    }

    #[test]
    fn apply_rejects_mismatched_features() {
        let t = table(&[("x", &[0.0, 1.0])]);
        let other = table(&[("y", &[0.0, 1.0])]);
        let (_, stats) = minmax_normalize(&t, None).unwrap();
        assert!(matches!(
            minmax_normalize(&other, Some(&stats)),
            Err(Error::StatsMismatch(_))
        ));
    }

    #[test]
    fn held_out_values_may_leave_unit_range() {
        let train = table(&[("x", &[0.0, 10.0])]);
        let test = table(&[("x", &[20.0, -10.0])]);
        let stats = NormalizationStats::fit(&train, FitScope::TrainOnly).unwrap();
        let out = stats.apply(&test).unwrap();
        assert_eq!(out.feature(0), &[2.0, -1.0]);
    }
}
