use flowgate_core::harness::{emit_cross_dataset, run_experiment, ExperimentConfig, ReportFormat, RunManifest};

fn config(extra: &str) -> ExperimentConfig {
    config_rows(12000, extra)
}

// the rarest preset class needs tens of thousands of rows to reach a holdout
fn config_rows(n_rows: usize, extra: &str) -> ExperimentConfig {
    ExperimentConfig::from_json(&format!(
        r#"{{
            "seed": 11,
            "dataset": {{
                "source": "synth", "preset": "cse2018", "n_rows": {n_rows},
                "corruption": {{"dup_rate": 0.05, "nan_rate": 0.01, "n_constant_cols": 2}}
            }},
            "models": [{{"kind": "baseline"}}]
            {extra}
        }}"#
    ))
    .unwrap()
}

#[test]
fn tuning_adds_default_tree_and_tuned_row() {
    let m = run_experiment(&config_rows(
        50000,
        r#", "tuning": {"epso": {"n_particles": 6, "n_iterations": 5}}"#,
    ))
    .unwrap();
    let names: Vec<&str> = m.results.iter().map(|r| r.name.as_str()).collect();
    assert_eq!(names, ["DT", "Majority", "EPSO DT"]);
    assert!(m.result("DT").unwrap().report.accuracy >= 0.99);
    let tuning = m.tuning.as_ref().unwrap();
    assert!(tuning.best_fitness >= tuning.default_fitness);
    assert_eq!(tuning.trace.len(), 5);
    let corruption = m.corruption.as_ref().unwrap();
    let prep = m.prep.as_ref().unwrap();
    assert_eq!(prep.stages[0].stage, "generate_flows");
    assert_eq!(
        prep.stage("drop_duplicate_rows").unwrap().rows_removed(),
        corruption.duplicates
    );
}

#[test]
fn reports_and_manifest_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let extra = format!(
        r#", "output_dir": {:?}, "formats": ["csv", "md", "json"]"#,
        out.display().to_string()
    );
    let m = run_experiment(&config(&extra)).unwrap();
    for f in [
        "metrics.csv",
        "metrics.md",
        "metrics.json",
        "summary.csv",
        "bars.csv",
        "radar.csv",
        "per_class.csv",
        "manifest.json",
    ] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let back = RunManifest::load(&out.join("manifest.json")).unwrap();
    assert_eq!(back.metric_section(), m.metric_section());

    let csv = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert!(csv.starts_with("Classifier,Accuracy,Precision,Recall,F1-Score"));

    let cross = dir.path().join("cross");
    let written = emit_cross_dataset(&[m.clone(), back], &cross, &[ReportFormat::Csv]).unwrap();
    assert!(!written.is_empty());
    let table = std::fs::read_to_string(cross.join("cross_dataset.csv")).unwrap();
    assert!(table.lines().next().unwrap().ends_with("Average"));
}

#[test]
fn failure_reports_stage_and_partial_manifest() {
    let cfg = ExperimentConfig::from_json(
        r#"{"seed": 1, "dataset": {"source": "csv", "path": "/nonexistent/flows.csv", "profile": "cse2018"},
            "models": [{"kind": "baseline"}]}"#,
    )
    .unwrap();
    let err = run_experiment(&cfg).unwrap_err();
    assert_eq!(err.stage, "preprocess");
    assert!(err.partial.results.is_empty());
    assert_eq!(err.partial.config_hash, cfg.hash());
}

#[test]
fn config_hash_tracks_content() {
    let a = config("");
    let b = config(r#", "name": "other""#);
    assert_eq!(a.hash(), config("").hash());
    assert_ne!(a.hash(), b.hash());
}
