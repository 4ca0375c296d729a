//! Experiment orchestration: JSON config, end-to-end runs, manifests and
//! report files.

mod config;
mod report;
mod run;

pub use config::{DatasetSource, ExperimentConfig, ModelSpec, PreprocessConfig, ReportFormat, TuningConfig};
pub use report::{
    averaged_rows, bar_series_csv, emit_cross_dataset, emit_reports, metric_rows, radar_series_csv, render_table,
    tuning_note, write_manifest, MetricRow, EQUAL_WEIGHT_NOTE,
};
pub use run::{
    resolve_threads, run_experiment, with_threads, CorruptionSummary, ExperimentError, ModelResult, RunManifest,
    StageTiming, TuningOutcome, THREADS_ENV, TOOL_VERSION,
};
