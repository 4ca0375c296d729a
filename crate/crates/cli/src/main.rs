use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use flowgate_core::dataset::{class_distribution, column_stats};
use flowgate_core::epso::{dt_objective, dt_params, optimize, trace_csv, EpsoConfig, SearchSpace, DT_DEFAULT_POINT};
use flowgate_core::harness::{
    emit_cross_dataset, render_table, resolve_threads, run_experiment, with_threads, ExperimentConfig, MetricRow,
    ReportFormat, RunManifest, TuningConfig,
};
use flowgate_core::ingest::{
    preprocess_pipeline, write_raw_csv, write_table_csv, DatasetProfile, FitScope, PipelineOptions, Prepared,
};
use flowgate_core::metrics::{evaluate, fmt9, AverageMode, EvalReport};
use flowgate_core::models::{
    derive_seed, fit_forest, fit_gbt, fit_tree, majority_baseline, ForestParams, GbtParams, Model, ModelDocument,
    TreeHyperparams,
};
use flowgate_core::synth::{corrupt, generate_flows, to_raw, CorruptionSpec, SynthSpec};
use flowgate_core::Error;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

#[derive(Parser)]
#[command(name = "flowgate", version, about = "Flow-record intrusion detection experiments")]
struct Cli {
    /// Seed for generation, splitting, models and tuning (overrides a config's seed)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (a file path for `synth`)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Table formats, comma separated
    #[arg(long, global = true, value_enum, value_delimiter = ',')]
    format: Vec<FormatArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
    Md,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Md => ReportFormat::Md,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    FullDataset,
    TrainOnly,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Dt,
    Rf,
    Gbt,
    Baseline,
}

#[derive(Args)]
struct DataArgs {
    /// Flow CSV to read
    #[arg(long)]
    input: PathBuf,
    /// Built-in profile name or profile JSON path
    #[arg(long, default_value = "cse2018")]
    profile: String,
    #[arg(long, default_value_t = 0.8)]
    split_ratio: f64,
    #[arg(long, value_enum, default_value = "full-dataset")]
    fit_scope: ScopeArg,
}

#[derive(Subcommand)]
enum Command {
    /// Run the preprocessing chain and print per-stage row/column counts
    Ingest {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Print column statistics and the class distribution of a cleaned table
    Stats {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Generate a synthetic flow CSV
    Synth {
        #[arg(long)]
        rows: usize,
        /// Class proportions: cse2018 or litnet2020
        #[arg(long, default_value = "cse2018")]
        profile: String,
        #[arg(long)]
        n_features: Option<usize>,
        #[arg(long)]
        separation: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        dup_rate: f64,
        #[arg(long, default_value_t = 0.0)]
        nan_rate: f64,
        #[arg(long, default_value_t = 0.0)]
        inf_rate: f64,
        #[arg(long, default_value_t = 0)]
        constant_cols: usize,
    },
    /// Train models from a config, or one model on a CSV
    Train {
        #[arg(long, conflicts_with_all = ["input", "model", "model_out"])]
        config: Option<PathBuf>,
        #[command(flatten)]
        data: Option<DataArgs>,
        #[arg(long, value_enum, default_value = "dt")]
        model: ModelArg,
        /// Where to save the trained model document
        #[arg(long)]
        model_out: Option<PathBuf>,
    },
    /// Tune decision-tree parameters with the particle swarm
    Tune {
        #[arg(long, conflicts_with = "input")]
        config: Option<PathBuf>,
        #[command(flatten)]
        data: Option<DataArgs>,
        #[arg(long, default_value_t = 0.3)]
        holdout: f64,
        #[arg(long)]
        particles: Option<usize>,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Evaluate a saved model on the test split of a CSV
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value = "weighted")]
        average: AverageArg,
    },
    /// Run a config end to end and write every report, or summarize manifests
    Report {
        #[arg(long, conflicts_with = "manifests")]
        config: Option<PathBuf>,
        /// Manifests to average, each dataset weighted equally
        #[arg(long, num_args = 1..)]
        manifests: Vec<PathBuf>,
    },
    /// Print the JSON Schema of the experiment config
    Schema,
}

#[derive(Clone, Copy, ValueEnum)]
enum AverageArg {
    Weighted,
    Macro,
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e.root() {
            Error::InvalidParameter(_) | Error::UnknownProfile(_) => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult = Result<(), Failure>;

struct Ctx {
    seed: Option<u64>,
    out: Option<PathBuf>,
    formats: Vec<ReportFormat>,
}

impl Ctx {
    fn seed(&self) -> u64 {
        self.seed.unwrap_or(42)
    }

    fn format(&self) -> ReportFormat {
        self.formats.first().copied().unwrap_or(ReportFormat::Csv)
    }

    fn out_dir(&self) -> Result<Option<&Path>, Failure> {
        if let Some(dir) = &self.out {
            std::fs::create_dir_all(dir).map_err(|e| {
                Failure::from(Error::Io {
                    path: dir.clone(),
                    source: e,
                })
            })?;
        }
        Ok(self.out.as_deref())
    }
}

fn options(data: &DataArgs, seed: u64) -> PipelineOptions {
    PipelineOptions {
        fit_scope: match data.fit_scope {
            ScopeArg::FullDataset => FitScope::FullDataset,
            ScopeArg::TrainOnly => FitScope::TrainOnly,
        },
        split_ratio: data.split_ratio,
        seed,
    }
}

fn prepare(data: &DataArgs, seed: u64) -> Result<Prepared, Failure> {
    let profile = DatasetProfile::resolve(&data.profile)?;
    Ok(preprocess_pipeline(&data.input, &profile, &options(data, seed))?)
}

fn write_file(path: &Path, f: impl FnOnce(std::fs::File) -> flowgate_core::Result<()>) -> CliResult {
    let file = std::fs::File::create(path).map_err(|e| {
        Failure::from(Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })?;
    Ok(f(file)?)
}

fn write_text(path: &Path, text: &str) -> CliResult {
    write_file(path, |mut f| {
        f.write_all(text.as_bytes()).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })
}

fn row(name: &str, r: &EvalReport) -> MetricRow {
    MetricRow {
        classifier: name.to_string(),
        accuracy: r.accuracy,
        precision: r.precision,
        recall: r.recall,
        f1: r.f1,
    }
}

fn print_rows(rows: &[MetricRow], ctx: &Ctx) -> CliResult {
    print!("{}", render_table(rows, false, ctx.format(), None)?);
    Ok(())
}

fn load_config(path: &Path, ctx: &Ctx) -> Result<ExperimentConfig, Failure> {
    let mut config = ExperimentConfig::load(path)?;
    if let Some(seed) = ctx.seed {
        config.seed = seed;
    }
    if let Some(out) = &ctx.out {
        config.output_dir = Some(out.clone());
    }
    if !ctx.formats.is_empty() {
        config.formats = ctx.formats.clone();
    }
    Ok(config)
}

fn run_config(config: &ExperimentConfig) -> Result<RunManifest, Failure> {
    run_experiment(config).map_err(|e| {
        if let Some(dir) = &config.output_dir {
            if let Ok(text) = serde_json::to_string_pretty(&e.partial) {
                let _ = std::fs::create_dir_all(dir);
                let _ = std::fs::write(dir.join("manifest.partial.json"), text + "\n");
            }
        }
        let mut f = Failure::from(e.source);
        f.message = format!("stage `{}` failed: {}", e.stage, f.message);
        f
    })
}

fn print_manifest_rows(m: &RunManifest, ctx: &Ctx) -> CliResult {
    let rows: Vec<MetricRow> = m.results.iter().map(|r| row(&r.name, &r.report)).collect();
    print_rows(&rows, ctx)
}

fn cmd_ingest(data: &DataArgs, ctx: &Ctx) -> CliResult {
    let prepared = prepare(data, ctx.seed())?;
    print!("{}", prepared.report.render());
    if let Some(dir) = ctx.out_dir()? {
        write_file(&dir.join("train.csv"), |f| write_table_csv(&prepared.split.train, f))?;
        write_file(&dir.join("test.csv"), |f| write_table_csv(&prepared.split.test, f))?;
        let report = serde_json::to_string_pretty(&prepared.report).map_err(Error::from)? + "\n";
        write_text(&dir.join("prep_report.json"), &report)?;
        let stats = serde_json::to_string_pretty(&prepared.stats).map_err(Error::from)? + "\n";
        write_text(&dir.join("normalization.json"), &stats)?;
    }
    Ok(())
}

fn cmd_stats(data: &DataArgs, ctx: &Ctx) -> CliResult {
    let prepared = prepare(data, ctx.seed())?;
    let summary = column_stats(&prepared.cleaned)?;
    let classes = class_distribution(&prepared.cleaned);
    if matches!(ctx.format(), ReportFormat::Json) {
        let doc = serde_json::json!({ "summary": summary, "classes": classes });
        println!("{}", serde_json::to_string_pretty(&doc).map_err(Error::from)?);
        return Ok(());
    }
    println!("rows: {}", summary.n_rows);
    println!(
        "{:<32} {:>16} {:>16} {:>16} {:>16} {:>10}",
        "column", "min", "max", "mean", "std", "distinct"
    );
    for c in &summary.columns {
        match &c.stats {
            Some(s) => println!(
                "{:<32} {:>16} {:>16} {:>16} {:>16} {:>10}",
                c.name,
                fmt9(s.min),
                fmt9(s.max),
                fmt9(s.mean),
                fmt9(s.std),
                c.distinct
            ),
            None => println!(
                "{:<32} {:>16} {:>16} {:>16} {:>16} {:>10}",
                c.name, "-", "-", "-", "-", c.distinct
            ),
        }
    }
    println!();
    println!("{:<24} {:>12} {:>12}", "class", "count", "ratio");
    for c in &classes {
        println!("{:<24} {:>12} {:>12}", c.name, c.count, fmt9(c.ratio));
    }
    Ok(())
}

fn cmd_synth(
    rows: usize,
    profile: &str,
    n_features: Option<usize>,
    separation: Option<f64>,
    corruption: CorruptionSpec,
    ctx: &Ctx,
) -> CliResult {
    let mut spec = SynthSpec::preset(profile, rows, ctx.seed())?;
    if let Some(d) = n_features {
        spec.n_features = d;
    }
    if let Some(s) = separation {
        spec.cluster_separation = s;
    }
    let table = generate_flows(&spec)?;
    let corrupted = corruption.dup_rate > 0.0
        || corruption.nan_rate > 0.0
        || corruption.inf_rate > 0.0
        || corruption.n_constant_cols > 0;
    let (raw, ledger) = if corrupted {
        let (raw, ledger) = corrupt(&table, &corruption)?;
        (raw, Some(ledger))
    } else {
        (to_raw(&table)?, None)
    };
    match &ctx.out {
        Some(path) => {
            write_file(path, |f| write_raw_csv(&raw, f))?;
            if let Some(l) = &ledger {
                let mut ledger_path = path.clone().into_os_string();
                ledger_path.push(".ledger.json");
                let text = serde_json::to_string_pretty(l).map_err(Error::from)? + "\n";
                write_text(Path::new(&ledger_path), &text)?;
            }
            let echo = serde_json::json!({
                "spec": spec,
                "corruption": if corrupted { Some(&corruption) } else { None },
                "rows_written": raw.n_rows(),
                "path": path,
            });
            println!("{}", serde_json::to_string_pretty(&echo).map_err(Error::from)?);
        }
        None => write_raw_csv(&raw, std::io::stdout().lock())?,
    }
    Ok(())
}

fn cmd_train(
    config: Option<&Path>,
    data: Option<&DataArgs>,
    model: ModelArg,
    model_out: Option<&Path>,
    ctx: &Ctx,
) -> CliResult {
    if let Some(path) = config {
        let mut config = load_config(path, ctx)?;
        config.tuning = None;
        if config.models.is_empty() {
            return Err(Failure::usage("config has no models to train"));
        }
        let manifest = run_config(&config)?;
        return print_manifest_rows(&manifest, ctx);
    }
    let data = data.ok_or_else(|| Failure::usage("train needs --config or --input"))?;
    let seed = ctx.seed();
    let prepared = prepare(data, seed)?;
    let train = &prepared.split.train;
    let (name, model) = with_threads(resolve_threads(None)?, || -> flowgate_core::Result<_> {
        Ok(match model {
            ModelArg::Dt => (
                "DT",
                Model::DecisionTree(fit_tree(
                    train,
                    &TreeHyperparams {
                        seed,
                        ..Default::default()
                    },
                )?),
            ),
            ModelArg::Rf => (
                "RF",
                Model::Forest(fit_forest(
                    train,
                    &ForestParams {
                        seed,
                        ..Default::default()
                    },
                )?),
            ),
            ModelArg::Gbt => ("XGBoost", Model::Gbt(fit_gbt(train, &GbtParams::default())?)),
            ModelArg::Baseline => ("Majority", Model::Baseline(majority_baseline(train)?)),
        })
    })??;
    let doc = ModelDocument::new(model, train);
    let test = &prepared.split.test;
    let report = evaluate(
        test.labels(),
        &doc.predict(test)?,
        test.class_names(),
        AverageMode::Weighted,
    )?;
    if let Some(path) = model_out {
        doc.save(path)?;
    }
    print_rows(&[row(name, &report)], ctx)
}

fn cmd_tune(
    config: Option<&Path>,
    data: Option<&DataArgs>,
    holdout: f64,
    particles: Option<usize>,
    iterations: Option<usize>,
    ctx: &Ctx,
) -> CliResult {
    let apply = |epso: &mut EpsoConfig| {
        if let Some(p) = particles {
            epso.n_particles = p;
        }
        if let Some(i) = iterations {
            epso.n_iterations = i;
        }
    };
    if let Some(path) = config {
        let mut config = load_config(path, ctx)?;
        let mut tuning = config.tuning.take().unwrap_or_default();
        apply(&mut tuning.epso);
        config.tuning = Some(tuning);
        let manifest = run_config(&config)?;
        let t = manifest.tuning.as_ref().expect("tuning ran");
        println!(
            "best max_depth={} min_samples_split={} min_samples_leaf={} fitness={}",
            t.best_position[0],
            t.best_position[1],
            t.best_position[2],
            fmt9(t.best_fitness)
        );
        return print_manifest_rows(&manifest, ctx);
    }

    let data = data.ok_or_else(|| Failure::usage("tune needs --config or --input"))?;
    let seed = ctx.seed();
    let prepared = prepare(data, seed)?;
    let space = SearchSpace::decision_tree();
    let mut epso = EpsoConfig {
        seed,
        seed_point: Some(DT_DEFAULT_POINT.to_vec()),
        ..TuningConfig::default().epso
    };
    apply(&mut epso);
    let (outcome, report) = with_threads(resolve_threads(None)?, || -> flowgate_core::Result<_> {
        let objective = dt_objective(&prepared.split, holdout, seed)?;
        let outcome = optimize(&space, &epso, &objective)?;
        let model = fit_tree(&prepared.split.train, &dt_params(&outcome.best_position, seed)?)?;
        let test = &prepared.split.test;
        let pred = flowgate_core::models::Classifier::predict(&model, test)?;
        let report = evaluate(test.labels(), &pred, test.class_names(), AverageMode::Weighted)?;
        Ok((outcome, report))
    })??;
    println!(
        "best max_depth={} min_samples_split={} min_samples_leaf={} fitness={}",
        outcome.best_position[0],
        outcome.best_position[1],
        outcome.best_position[2],
        fmt9(outcome.best_fitness)
    );
    if let Some(dir) = ctx.out_dir()? {
        write_text(&dir.join("tuning_trace.csv"), &trace_csv(&space, &outcome.trace)?)?;
    }
    print_rows(&[row("EPSO DT", &report)], ctx)
}

fn cmd_eval(model: &Path, data: &DataArgs, average: AverageArg, ctx: &Ctx) -> CliResult {
    let doc = ModelDocument::load(model)?;
    let prepared = prepare(data, ctx.seed())?;
    let test = &prepared.split.test;
    if test.class_names() != doc.class_names.as_slice() {
        return Err(Failure {
            code: EXIT_DATA,
            message: "model classes differ from the dataset's classes".into(),
        });
    }
    let mode = match average {
        AverageArg::Weighted => AverageMode::Weighted,
        AverageArg::Macro => AverageMode::Macro,
    };
    let pred = with_threads(resolve_threads(None)?, || doc.predict(test))??;
    let report = evaluate(test.labels(), &pred, test.class_names(), mode)?;
    print_rows(&[row(doc.model.kind(), &report)], ctx)
}

fn cmd_report(config: Option<&Path>, manifests: &[PathBuf], ctx: &Ctx) -> CliResult {
    if let Some(path) = config {
        let config = load_config(path, ctx)?;
        if config.output_dir.is_none() {
            return Err(Failure::usage("report needs --out or an output_dir in the config"));
        }
        let manifest = run_config(&config)?;
        return print_manifest_rows(&manifest, ctx);
    }
    if manifests.is_empty() {
        return Err(Failure::usage("report needs --config or --manifests"));
    }
    let loaded = manifests
        .iter()
        .map(|p| RunManifest::load(p))
        .collect::<flowgate_core::Result<Vec<_>>>()?;
    let dir = ctx
        .out_dir()?
        .ok_or_else(|| Failure::usage("report --manifests needs --out"))?;
    let formats = if ctx.formats.is_empty() {
        vec![ReportFormat::Csv]
    } else {
        ctx.formats.clone()
    };
    for path in emit_cross_dataset(&loaded, dir, &formats)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn dispatch(cli: Cli) -> CliResult {
    let ctx = Ctx {
        seed: cli.seed,
        out: cli.out,
        formats: cli.format.into_iter().map(ReportFormat::from).collect(),
    };
    match cli.command {
        Command::Ingest { data } => cmd_ingest(&data, &ctx),
        Command::Stats { data } => cmd_stats(&data, &ctx),
        Command::Synth {
            rows,
            profile,
            n_features,
            separation,
            dup_rate,
            nan_rate,
            inf_rate,
            constant_cols,
        } => cmd_synth(
            rows,
            &profile,
            n_features,
            separation,
            CorruptionSpec {
                dup_rate,
                nan_rate,
                inf_rate,
                n_constant_cols: constant_cols,
                seed: derive_seed(ctx.seed(), 1),
            },
            &ctx,
        ),
        Command::Train {
            config,
            data,
            model,
            model_out,
        } => cmd_train(config.as_deref(), data.as_ref(), model, model_out.as_deref(), &ctx),
        Command::Tune {
            config,
            data,
            holdout,
            particles,
            iterations,
        } => cmd_tune(config.as_deref(), data.as_ref(), holdout, particles, iterations, &ctx),
        Command::Eval { model, data, average } => cmd_eval(&model, &data, average, &ctx),
        Command::Report { config, manifests } => cmd_report(config.as_deref(), &manifests, &ctx),
        Command::Schema => {
            print!("{}", ExperimentConfig::json_schema());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| dispatch(cli))) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(f)) => {
            eprintln!("flowgate: {}", f.message);
            ExitCode::from(f.code)
        }
        Err(_) => ExitCode::from(EXIT_INTERNAL),
    }
}
