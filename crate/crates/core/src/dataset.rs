//! Immutable column-major dataset, label encoding and descriptive statistics.

use std::collections::{HashMap, HashSet};
use std::hash::{DefaultHasher, Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer class id, dense in `[0, n_classes)`.
pub type ClassId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Timestamp,
    Label,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    pub index: usize,
}

/// Ordered name <-> id mapping with per-id row counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEncoding {
    class_names: Vec<String>,
    counts: Vec<u64>,
}

impl LabelEncoding {
    pub fn new(class_names: Vec<String>, counts: Vec<u64>) -> Result<Self> {
        if class_names.len() != counts.len() {
            return Err(Error::LengthMismatch {
                left: class_names.len(),
                right: counts.len(),
            });
        }
        let mut seen = HashSet::new();
        for name in &class_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateColumn(name.clone()));
            }
        }
        Ok(Self { class_names, counts })
    }

    /// Builds the encoding and tallies `ids` against it.
    pub fn tally(class_names: Vec<String>, ids: &[ClassId]) -> Result<Self> {
        let mut counts = vec![0u64; class_names.len()];
        for &id in ids {
            let slot = counts.get_mut(id as usize).ok_or(Error::LabelOutOfRange {
                label: id as usize,
                n_classes: class_names.len(),
            })?;
            *slot += 1;
        }
        Self::new(class_names, counts)
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.class_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class_names.is_empty()
    }

    pub fn id_of(&self, name: &str) -> Option<ClassId> {
        self.class_names.iter().position(|n| n == name).map(|i| i as ClassId)
    }

    pub fn name_of(&self, id: ClassId) -> Option<&str> {
        self.class_names.get(id as usize).map(String::as_str)
    }
}

/// Column-major numeric table with one label column.
///
/// Feature columns are shared behind `Arc`, so row or column selections copy
/// only what changes. The label column is always the last schema entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnarTable {
    schema: Vec<ColumnSchema>,
    columns: Vec<Arc<[f64]>>,
    labels: Arc<[ClassId]>,
    encoding: LabelEncoding,
}

/// A named feature column used to assemble a [`ColumnarTable`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureColumn {
    pub name: String,
    pub kind: ColumnKind,
    pub values: Arc<[f64]>,
}

impl FeatureColumn {
    pub fn new(name: impl Into<String>, kind: ColumnKind, values: impl Into<Arc<[f64]>>) -> Self {
        Self {
            name: name.into(),
            kind,
            values: values.into(),
        }
    }

    pub fn numeric(name: impl Into<String>, values: impl Into<Arc<[f64]>>) -> Self {
        Self::new(name, ColumnKind::Numeric, values)
    }
}

impl ColumnarTable {
    pub fn new(
        features: Vec<FeatureColumn>,
        label_name: impl Into<String>,
        labels: impl Into<Arc<[ClassId]>>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let labels: Arc<[ClassId]> = labels.into();
        let label_name = label_name.into();
        let n_rows = labels.len();
        let mut names = HashSet::new();
        let mut schema = Vec::with_capacity(features.len() + 1);
        let mut columns = Vec::with_capacity(features.len());
        for (index, col) in features.into_iter().enumerate() {
            if col.kind == ColumnKind::Label {
                return Err(Error::InvalidParameter(format!(
                    "feature column `{}` cannot have kind label",
                    col.name
                )));
            }
            if col.values.len() != n_rows {
                return Err(Error::LengthMismatch {
                    left: col.values.len(),
                    right: n_rows,
                });
            }
            if !names.insert(col.name.clone()) {
                return Err(Error::DuplicateColumn(col.name));
            }
            schema.push(ColumnSchema {
                name: col.name,
                kind: col.kind,
                index,
            });
            columns.push(col.values);
        }
        if !names.insert(label_name.clone()) {
            return Err(Error::DuplicateColumn(label_name));
        }
        schema.push(ColumnSchema {
            name: label_name,
            kind: ColumnKind::Label,
            index: columns.len(),
        });
        let encoding = LabelEncoding::tally(class_names, &labels)?;
        Ok(Self {
            schema,
            columns,
            labels,
            encoding,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn n_classes(&self) -> usize {
        self.encoding.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn schema(&self) -> &[ColumnSchema] {
        &self.schema
    }

    pub fn feature_schema(&self) -> &[ColumnSchema] {
        &self.schema[..self.columns.len()]
    }

    pub fn feature_names(&self) -> Vec<&str> {
        self.feature_schema().iter().map(|c| c.name.as_str()).collect()
    }

    pub fn label_name(&self) -> &str {
        &self.schema[self.columns.len()].name
    }

    pub fn feature(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn features(&self) -> impl Iterator<Item = &[f64]> {
        self.columns.iter().map(|c| &c[..])
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        self.encoding.class_names()
    }

    pub fn encoding(&self) -> &LabelEncoding {
        &self.encoding
    }

    /// Feature values of row `i`.
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    /// Feature columns as owned builders, for constructing derived tables.
    pub fn feature_columns(&self) -> Vec<FeatureColumn> {
        self.feature_schema()
            .iter()
            .zip(&self.columns)
            .map(|(s, v)| FeatureColumn::new(s.name.clone(), s.kind, v.clone()))
            .collect()
    }

    /// New table holding rows `indices` in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> ColumnarTable {
        let columns: Vec<Arc<[f64]>> = self
            .columns
            .iter()
            .map(|c| indices.iter().map(|&i| c[i]).collect())
            .collect();
        let labels: Arc<[ClassId]> = indices.iter().map(|&i| self.labels[i]).collect();
        let encoding = LabelEncoding::tally(self.class_names().to_vec(), &labels).expect("labels already validated");
        ColumnarTable {
            schema: self.schema.clone(),
            columns,
            labels,
            encoding,
        }
    }

    /// New table with the same schema and labels but replaced feature values.
    pub fn with_feature_values(&self, columns: Vec<Arc<[f64]>>) -> Result<ColumnarTable> {
        if columns.len() != self.columns.len() {
            return Err(Error::FeatureMismatch {
                expected: self.columns.len(),
                found: columns.len(),
            });
        }
        if let Some(bad) = columns.iter().find(|c| c.len() != self.n_rows()) {
            return Err(Error::LengthMismatch {
                left: bad.len(),
                right: self.n_rows(),
            });
        }
        Ok(ColumnarTable {
            schema: self.schema.clone(),
            columns,
            labels: self.labels.clone(),
            encoding: self.encoding.clone(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumericStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSummary {
    pub name: String,
    pub kind: ColumnKind,
    /// `None` for the label column.
    pub stats: Option<NumericStats>,
    pub distinct: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_rows: usize,
    pub columns: Vec<ColumnSummary>,
}

/// Min, max, mean and sample standard deviation (divisor n - 1) of a column.
///
/// A single value has standard deviation 0.
pub fn numeric_stats(values: &[f64]) -> Option<NumericStats> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut sum = 0.0;
    for &v in values {
        min = min.min(v);
        max = max.max(v);
        sum += v;
    }
    // summation rounding can push the mean a hair past the extremes
    let mean = (sum / n).clamp(min, max);
    let std = if values.len() > 1 {
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        (ss / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some(NumericStats { min, max, mean, std })
}

fn canonical_bits(v: f64) -> u64 {
    // -0.0 and 0.0 are the same value for distinct counting
    (v + 0.0).to_bits()
}

pub fn column_stats(table: &ColumnarTable) -> Result<DatasetSummary> {
    if table.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut columns: Vec<ColumnSummary> = table
        .feature_schema()
        .iter()
        .zip(table.features())
        .map(|(schema, values)| ColumnSummary {
            name: schema.name.clone(),
            kind: schema.kind,
            stats: numeric_stats(values),
            distinct: values.iter().map(|&v| canonical_bits(v)).collect::<HashSet<_>>().len(),
        })
        .collect();
    columns.push(ColumnSummary {
        name: table.label_name().to_string(),
        kind: ColumnKind::Label,
        stats: None,
        distinct: table.labels().iter().collect::<HashSet<_>>().len(),
    });
    Ok(DatasetSummary {
        n_rows: table.n_rows(),
        columns,
    })
}

/// Marks the first occurrence of each distinct row.
///
/// Rows are bucketed by `hash_row` and confirmed with `rows_equal`, so the
/// result never depends on hash collisions.
pub(crate) fn first_occurrence_mask(
    n_rows: usize,
    hash_row: impl Fn(usize) -> u64,
    rows_equal: impl Fn(usize, usize) -> bool,
) -> Vec<bool> {
    let mut buckets: HashMap<u64, Vec<usize>> = HashMap::with_capacity(n_rows);
    (0..n_rows)
        .map(|i| {
            let bucket = buckets.entry(hash_row(i)).or_default();
            let fresh = !bucket.iter().any(|&j| rows_equal(i, j));
            if fresh {
                bucket.push(i);
            }
            fresh
        })
        .collect()
}

fn table_row_mask(table: &ColumnarTable) -> Vec<bool> {
    let hash_row = |i: usize| {
        let mut h = DefaultHasher::new();
        for col in table.features() {
            col[i].to_bits().hash(&mut h);
        }
        table.labels()[i].hash(&mut h);
        h.finish()
    };
    let rows_equal = |a: usize, b: usize| {
        table.labels()[a] == table.labels()[b] && table.features().all(|c| c[a].to_bits() == c[b].to_bits())
    };
    first_occurrence_mask(table.n_rows(), hash_row, rows_equal)
}

/// Number of distinct full-row tuples (features plus label), compared bitwise.
pub fn count_unique_rows(table: &ColumnarTable) -> usize {
    table_row_mask(table).into_iter().filter(|&k| k).count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassShare {
    pub name: String,
    pub count: u64,
    pub ratio: f64,
}

pub fn class_distribution(table: &ColumnarTable) -> Vec<ClassShare> {
    let n = table.n_rows();
    table
        .class_names()
        .iter()
        .zip(table.encoding().counts())
        .map(|(name, &count)| ClassShare {
            name: name.clone(),
            count,
            ratio: if n == 0 { 0.0 } else { count as f64 / n as f64 },
        })
        .collect()
}
