use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{DatasetSource, ExperimentConfig, ModelSpec};
use super::report::{emit_reports, write_manifest};
use crate::epso::{dt_objective, dt_params, optimize, EvalFailure, SearchSpace, TraceRow, DT_DEFAULT_POINT};
use crate::error::{Error, Result};
use crate::ingest::{
    preprocess_pipeline, preprocess_raw, DatasetProfile, PipelineOptions, PrepReport, Prepared, StageRecord,
};
use crate::metrics::{evaluate, EvalReport};
use crate::models::{derive_seed, fit_forest, fit_gbt, fit_tree, majority_baseline, Classifier, TreeHyperparams};
use crate::synth::{corrupt, generate_flows, to_raw, CorruptionLedger, SynthSpec};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const THREADS_ENV: &str = "FLOWGATE_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSummary {
    pub duplicates: usize,
    pub nan_cells: usize,
    pub inf_cells: usize,
    pub constant_columns: Vec<String>,
}

impl From<&CorruptionLedger> for CorruptionSummary {
    fn from(l: &CorruptionLedger) -> Self {
        Self {
            duplicates: l.duplicates.len(),
            nan_cells: l.nan_cells.len(),
            inf_cells: l.inf_cells.len(),
            constant_columns: l.constant_columns.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResult {
    pub name: String,
    pub kind: String,
    pub params: serde_json::Value,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningOutcome {
    pub space: SearchSpace,
    pub best_position: Vec<i64>,
    pub best_fitness: f64,
    /// Tuning fitness of default tree parameters on the same holdout.
    pub default_fitness: f64,
    pub fit_rows: usize,
    pub holdout_rows: usize,
    pub evaluations: usize,
    pub cache_hits: usize,
    pub failures: Vec<EvalFailure>,
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub threads: usize,
    pub timings: Vec<StageTiming>,
    pub prep: Option<PrepReport>,
    pub corruption: Option<CorruptionSummary>,
    pub results: Vec<ModelResult>,
    pub tuning: Option<TuningOutcome>,
}

#[derive(Serialize)]
struct MetricSection<'a> {
    config_hash: &'a str,
    prep: &'a Option<PrepReport>,
    corruption: &'a Option<CorruptionSummary>,
    results: &'a [ModelResult],
    tuning: &'a Option<TuningOutcome>,
}

impl RunManifest {
    fn new(config: &ExperimentConfig, threads: usize) -> Self {
        Self {
            tool_version: TOOL_VERSION.to_string(),
            config_hash: config.hash(),
            config: config.clone(),
            threads,
            timings: Vec::new(),
            prep: None,
            corruption: None,
            results: Vec::new(),
            tuning: None,
        }
    }

    /// Everything that must be reproducible: preprocessing accounting,
    /// metrics and tuning, without timings or thread count.
    pub fn metric_section(&self) -> String {
        let section = MetricSection {
            config_hash: &self.config_hash,
            prep: &self.prep,
            corruption: &self.corruption,
            results: &self.results,
            tuning: &self.tuning,
        };
        serde_json::to_string_pretty(&section).expect("metric section serializes")
    }

    pub fn result(&self, name: &str) -> Option<&ModelResult> {
        self.results.iter().find(|r| r.name == name)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("stage `{stage}` failed: {source}")]
pub struct ExperimentError {
    pub stage: String,
    #[source]
    pub source: Error,
    pub partial: Box<RunManifest>,
}

/// Worker count: config override, else `FLOWGATE_THREADS`, else all cores.
pub fn resolve_threads(config_threads: Option<usize>) -> Result<usize> {
    if let Some(n) = config_threads {
        return Ok(n.max(1));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Error::InvalidParameter(format!(
                "{THREADS_ENV} must be a positive integer, got `{v}`"
            ))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Runs `f` on a pool capped at `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

struct Runner<'a> {
    config: &'a ExperimentConfig,
    manifest: RunManifest,
}

impl Runner<'_> {
    fn stage<T>(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut Self) -> Result<T>,
    ) -> std::result::Result<T, (String, Error)> {
        let start = Instant::now();
        let out = f(self);
        self.manifest.timings.push(StageTiming {
            stage: name.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out.map_err(|e| (name.to_string(), e))
    }

    fn prepare(&mut self) -> Result<Prepared> {
        let options = PipelineOptions {
            fit_scope: self.config.preprocessing.fit_scope,
            split_ratio: self.config.preprocessing.split_ratio,
            seed: self.config.seed,
        };
        match &self.config.dataset {
            DatasetSource::Csv { path, profile } => {
                let profile = DatasetProfile::resolve(profile)?;
                preprocess_pipeline(path, &profile, &options)
            }
            DatasetSource::Synth {
                preset,
                n_rows,
                n_features,
                cluster_separation,
                corruption,
            } => {
                let mut spec = SynthSpec::preset(preset, *n_rows, self.config.seed)?;
                if let Some(d) = n_features {
                    spec.n_features = *d;
                }
                if let Some(s) = cluster_separation {
                    spec.cluster_separation = *s;
                }
                let table = generate_flows(&spec)?;
                let raw = match corruption {
                    Some(c) => {
                        let mut c = c.clone();
                        c.seed = derive_seed(self.config.seed, 1);
                        let (raw, ledger) = corrupt(&table, &c)?;
                        self.manifest.corruption = Some(CorruptionSummary::from(&ledger));
                        raw
                    }
                    None => to_raw(&table)?,
                };
                let profile = DatasetProfile::builtin(&format!("synth-{}", preset.trim_start_matches("synth-")))?;
                let mut prepared = preprocess_raw(&raw, &profile, &options)?;
                prepared.report.stages.insert(
                    0,
                    StageRecord::between(
                        "generate_flows",
                        &raw,
                        &raw,
                        format!("preset {preset}, {} rows, seed {}", n_rows, self.config.seed),
                    ),
                );
                Ok(prepared)
            }
        }
    }

    fn train_and_evaluate(&self, spec: &ModelSpec, prepared: &Prepared) -> Result<ModelResult> {
        let seed = self.config.seed;
        let train = &prepared.split.train;
        let (kind, params, model): (&str, serde_json::Value, Box<dyn Classifier>) = match spec {
            ModelSpec::DecisionTree { params, .. } => {
                let p = TreeHyperparams { seed, ..params.clone() };
                (
                    "decision_tree",
                    serde_json::to_value(&p)?,
                    Box::new(fit_tree(train, &p)?),
                )
            }
            ModelSpec::Forest { params, .. } => {
                let mut p = params.clone();
                p.seed = seed;
                p.tree.seed = seed;
                ("forest", serde_json::to_value(&p)?, Box::new(fit_forest(train, &p)?))
            }
            ModelSpec::Gbt { params, .. } => ("gbt", serde_json::to_value(params)?, Box::new(fit_gbt(train, params)?)),
            ModelSpec::Baseline { .. } => ("baseline", serde_json::Value::Null, Box::new(majority_baseline(train)?)),
        };
        let report = self.score(model.as_ref(), prepared)?;
        Ok(ModelResult {
            name: spec.display_name(),
            kind: kind.to_string(),
            params,
            report,
        })
    }

    fn score(&self, model: &dyn Classifier, prepared: &Prepared) -> Result<EvalReport> {
        let test = &prepared.split.test;
        let pred = model.predict(test)?;
        evaluate(test.labels(), &pred, test.class_names(), self.config.average)
    }

    fn tune(&mut self, prepared: &Prepared) -> Result<()> {
        let Some(tuning) = self.config.tuning.clone() else {
            return Ok(());
        };
        let seed = self.config.seed;
        let objective = dt_objective(&prepared.split, tuning.holdout_fraction, seed)?;
        let mut epso = tuning.epso.clone();
        epso.seed = seed;
        if tuning.seed_default {
            epso.seed_point = Some(DT_DEFAULT_POINT.to_vec());
        }
        let default_fitness = objective.fitness(&TreeHyperparams {
            seed,
            ..TreeHyperparams::default()
        })?;
        let outcome = optimize(&tuning.space, &epso, &objective)?;
        self.manifest.tuning = Some(TuningOutcome {
            space: tuning.space.clone(),
            best_position: outcome.best_position.clone(),
            best_fitness: outcome.best_fitness,
            default_fitness,
            fit_rows: objective.fit.n_rows(),
            holdout_rows: objective.holdout.n_rows(),
            evaluations: outcome.evaluations,
            cache_hits: outcome.cache_hits,
            failures: outcome.failures,
            trace: outcome.trace,
        });

        let params = dt_params(&outcome.best_position, seed)?;
        let model = fit_tree(&prepared.split.train, &params)?;
        let report = self.score(&model, prepared)?;
        self.manifest.results.push(ModelResult {
            name: tuning.name.clone(),
            kind: "decision_tree".into(),
            params: serde_json::to_value(&params)?,
            report,
        });
        Ok(())
    }
}

fn run_stages(runner: &mut Runner) -> std::result::Result<(), (String, Error)> {
    let prepared = runner.stage("preprocess", |r| r.prepare())?;
    runner.manifest.prep = Some(prepared.report.clone());

    let mut specs = runner.config.models.clone();
    let has_tree = specs.iter().any(|m| matches!(m, ModelSpec::DecisionTree { .. }));
    if runner.config.tuning.is_some() && !has_tree {
        specs.insert(
            0,
            ModelSpec::DecisionTree {
                name: None,
                params: TreeHyperparams::default(),
            },
        );
    }
    for spec in &specs {
        let name = spec.display_name();
        let result = runner.stage(&format!("model:{name}"), |r| r.train_and_evaluate(spec, &prepared))?;
        runner.manifest.results.push(result);
    }

    if runner.config.tuning.is_some() {
        runner.stage("tune", |r| r.tune(&prepared))?;
    }

    if let Some(dir) = runner.config.output_dir.clone() {
        runner.stage("write_reports", |r| {
            emit_reports(&r.manifest, &dir, &r.config.formats)?;
            write_manifest(&r.manifest, &dir)
        })?;
    }
    Ok(())
}

/// Preprocess, train and evaluate every model, optionally tune a decision
/// tree, and write reports when `output_dir` is set. On failure the error
/// carries the failing stage and the manifest built so far.
pub fn run_experiment(config: &ExperimentConfig) -> std::result::Result<RunManifest, ExperimentError> {
    let fail = |stage: &str, source: Error, partial: RunManifest| ExperimentError {
        stage: stage.to_string(),
        source,
        partial: Box::new(partial),
    };
    let threads = match resolve_threads(config.threads) {
        Ok(n) => n,
        Err(e) => return Err(fail("config", e, RunManifest::new(config, 0))),
    };
    if let Err(e) = config.validate() {
        return Err(fail("config", e, RunManifest::new(config, threads)));
    }

    let mut runner = Runner {
        config,
        manifest: RunManifest::new(config, threads),
    };
    match with_threads(threads, || run_stages(&mut runner)) {
        Err(e) => Err(fail("thread_pool", e, runner.manifest)),
        Ok(Err((stage, e))) => Err(fail(&stage, e, runner.manifest)),
        Ok(Ok(())) => Ok(runner.manifest),
    }
}
