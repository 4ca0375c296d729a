//! Preprocessing chain: load, clean, encode, normalize, split.
//!
//! Every stage consumes an immutable table and returns a new one together
//! with a [`StageRecord`] describing what it changed.

mod clean;
mod csv_io;
mod encode;
mod normalize;
mod pipeline;
mod profile;
mod split;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dataset::{ColumnKind, ColumnSchema};
use crate::error::{Error, Result};

pub use clean::{
    drop_columns_by_name, drop_duplicate_rows, drop_invalid_rows, drop_zero_variance_columns, epoch_seconds,
    merge_timestamps,
};
pub use csv_io::{format_real, load_csv, load_csv_bytes, parse_cell, write_raw_csv, write_table_csv};
pub use encode::{encode_categoricals, load_prepared_csv, EncodedTable};
pub use normalize::{minmax_normalize, FitScope, NormalizationStats};
pub use pipeline::{preprocess_pipeline, preprocess_raw, PipelineOptions, Prepared};
pub use profile::{
    DatasetProfile, TimestampMerge, CSE2018_CLASSES, CSE2018_COUNTS, LITNET2020_CLASSES, LITNET2020_COUNTS,
};
pub use split::{stratified_split, train_quota, SplitPair};

/// Cells of one raw column before encoding.
#[derive(Debug, Clone, PartialEq)]
pub enum RawColumn {
    /// May hold NaN and infinities.
    Numeric(Vec<f64>),
    /// Verbatim tokens; the empty token means missing.
    Categorical(Vec<String>),
}

impl RawColumn {
    pub fn len(&self) -> usize {
        match self {
            RawColumn::Numeric(v) => v.len(),
            RawColumn::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn select(&self, rows: &[usize]) -> RawColumn {
        match self {
            RawColumn::Numeric(v) => RawColumn::Numeric(rows.iter().map(|&i| v[i]).collect()),
            RawColumn::Categorical(v) => RawColumn::Categorical(rows.iter().map(|&i| v[i].clone()).collect()),
        }
    }
}

/// Rectangular table of raw cells as read from CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    schema: Vec<ColumnSchema>,
    columns: Vec<Arc<RawColumn>>,
    n_rows: usize,
}

impl RawTable {
    pub fn new(columns: Vec<(String, ColumnKind, RawColumn)>) -> Result<Self> {
        let n_rows = columns.first().map_or(0, |c| c.2.len());
        let mut schema = Vec::with_capacity(columns.len());
        let mut cells = Vec::with_capacity(columns.len());
        for (index, (name, kind, col)) in columns.into_iter().enumerate() {
            if col.len() != n_rows {
                return Err(Error::LengthMismatch {
                    left: col.len(),
                    right: n_rows,
                });
            }
            if schema.iter().any(|s: &ColumnSchema| s.name == name) {
                return Err(Error::DuplicateColumn(name));
            }
            schema.push(ColumnSchema { name, kind, index });
            cells.push(Arc::new(col));
        }
        Ok(Self {
            schema,
            columns: cells,
            n_rows,
        })
    }

    fn from_parts(names: Vec<(String, ColumnKind)>, columns: Vec<Arc<RawColumn>>, n_rows: usize) -> Self {
        let schema = names
            .into_iter()
            .enumerate()
            .map(|(index, (name, kind))| ColumnSchema { name, kind, index })
            .collect();
        Self {
            schema,
            columns,
            n_rows,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn schema(&self) -> &[ColumnSchema] {
        &self.schema
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.schema.iter().map(|s| s.name.as_str()).collect()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|s| s.name == name)
    }

    pub fn column(&self, j: usize) -> &RawColumn {
        &self.columns[j]
    }

    pub fn column_by_name(&self, name: &str) -> Option<&RawColumn> {
        self.position(name).map(|j| self.column(j))
    }

    /// Keeps rows whose index is `true` in `keep`, in their original order.
    pub fn filter_rows(&self, keep: &[bool]) -> RawTable {
        let rows: Vec<usize> = (0..self.n_rows).filter(|&i| keep[i]).collect();
        self.select_rows(&rows)
    }

    pub fn select_rows(&self, rows: &[usize]) -> RawTable {
        let columns = self.columns.iter().map(|c| Arc::new(c.select(rows))).collect();
        RawTable {
            schema: self.schema.clone(),
            columns,
            n_rows: rows.len(),
        }
    }

    /// Keeps the columns at `indices`, in that order.
    pub fn select_columns(&self, indices: &[usize]) -> RawTable {
        let names = indices
            .iter()
            .map(|&j| (self.schema[j].name.clone(), self.schema[j].kind))
            .collect();
        let columns = indices.iter().map(|&j| self.columns[j].clone()).collect();
        RawTable::from_parts(names, columns, self.n_rows)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub rows_before: usize,
    pub rows_after: usize,
    pub columns_before: usize,
    pub columns_after: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub removed_columns: Vec<String>,
    pub details: String,
}

impl StageRecord {
    pub(crate) fn between(stage: &str, before: &RawTable, after: &RawTable, details: String) -> Self {
        Self {
            stage: stage.to_string(),
            rows_before: before.n_rows(),
            rows_after: after.n_rows(),
            columns_before: before.n_columns(),
            columns_after: after.n_columns(),
            removed_columns: Vec::new(),
            details,
        }
    }

    pub fn rows_removed(&self) -> usize {
        self.rows_before.saturating_sub(self.rows_after)
    }
}

/// Ordered row/column accounting for each preprocessing stage. Column counts
/// include the label column.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrepReport {
    pub stages: Vec<StageRecord>,
}

impl PrepReport {
    pub fn push(&mut self, record: StageRecord) {
        self.stages.push(record);
    }

    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.stage == name)
    }

    /// Fixed-width text rendering used by the CLI.
    pub fn render(&self) -> String {
        let mut out = format!(
            "{:<28} {:>12} {:>12} {:>8} {:>8}  details\n",
            "stage", "rows_in", "rows_out", "cols_in", "cols_out"
        );
        for s in &self.stages {
            out.push_str(&format!(
                "{:<28} {:>12} {:>12} {:>8} {:>8}  {}\n",
                s.stage, s.rows_before, s.rows_after, s.columns_before, s.columns_after, s.details
            ));
        }
        out
    }
}
