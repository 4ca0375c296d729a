use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty dataset")]
    EmptyDataset,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRow { line: u64, expected: usize, found: usize },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),

    #[error("calendar component out of range: {0}")]
    CalendarRange(String),

    #[error("refusing to drop label column `{0}`")]
    DropLabel(String),

    #[error("label value `{0}` is not one of the profile's class names")]
    UnknownLabel(String),

    #[error("normalization stats do not match table: {0}")]
    StatsMismatch(String),

    #[error("class `{0}` has no rows")]
    EmptyClass(String),

    #[error("class `{0}` vanished from the holdout split")]
    EmptyHoldoutClass(String),

    #[error("quota for class `{class}` rounds to zero at n_rows = {n_rows}; increase n_rows")]
    ZeroQuota { class: String, n_rows: usize },

    #[error("class counts are all zero")]
    ZeroCounts,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("label {label} out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },

    #[error("feature count mismatch: model expects {expected}, table has {found}")]
    FeatureMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown dataset profile `{0}`")]
    UnknownProfile(String),

    #[error("unsupported model document version {0}")]
    ModelVersion(u32),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &str) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage: stage.to_string(),
                source: Box::new(e),
            },
        }
    }

    /// Error with any stage wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}
