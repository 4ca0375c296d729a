use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn flowgate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flowgate"))
        .args(args)
        .env("FLOWGATE_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = flowgate(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Corrupted 50k-row synthetic CSV and its ledger.
fn corrupted_csv(dir: &Path) -> (PathBuf, serde_json::Value) {
    let csv = dir.join("flows.csv");
    ok(&[
        "synth",
        "--rows",
        "50000",
        "--profile",
        "cse2018",
        "--seed",
        "7",
        "--dup-rate",
        "0.05",
        "--nan-rate",
        "0.01",
        "--constant-cols",
        "2",
        "--out",
        s(&csv),
    ]);
    let mut ledger = csv.clone().into_os_string();
    ledger.push(".ledger.json");
    let ledger = serde_json::from_str(&std::fs::read_to_string(ledger).unwrap()).unwrap();
    (csv, ledger)
}

#[test]
fn synth_writes_requested_rows_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let echo = ok(&[
        "synth",
        "--rows",
        "10000",
        "--profile",
        "cse2018",
        "--seed",
        "7",
        "--out",
        s(&a),
    ]);
    ok(&[
        "synth",
        "--rows",
        "10000",
        "--profile",
        "cse2018",
        "--seed",
        "7",
        "--out",
        s(&b),
    ]);
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 10001);
    assert!(text.lines().next().unwrap().ends_with(",Label"));
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let echo: serde_json::Value = serde_json::from_str(&echo).unwrap();
    assert_eq!(echo["rows_written"], 10000);

    let stdout = ok(&["synth", "--rows", "50", "--profile", "cse2018", "--seed", "7"]);
    assert_eq!(stdout.lines().count(), 51);
}

#[test]
fn ingest_counts_match_the_corruption_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, ledger) = corrupted_csv(dir.path());
    let out = dir.path().join("prep");
    ok(&[
        "ingest",
        "--input",
        s(&csv),
        "--profile",
        "synth-cse2018",
        "--seed",
        "7",
        "--out",
        s(&out),
    ]);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("prep_report.json")).unwrap()).unwrap();
    let stage = |name: &str| {
        report["stages"]
            .as_array()
            .unwrap()
            .iter()
            .find(|s| s["stage"] == name)
            .unwrap()
            .clone()
    };
    let removed = |name: &str| {
        let s = stage(name);
        s["rows_before"].as_u64().unwrap() - s["rows_after"].as_u64().unwrap()
    };
    assert_eq!(
        removed("drop_duplicate_rows"),
        ledger["duplicates"].as_array().unwrap().len() as u64
    );
    assert_eq!(
        removed("drop_invalid_rows"),
        ledger["nan_cells"].as_array().unwrap().len() as u64
    );
    assert_eq!(
        stage("drop_zero_variance_columns")["removed_columns"],
        ledger["constant_columns"]
    );
    for f in ["train.csv", "test.csv", "normalization.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }

    let stats = ok(&[
        "stats",
        "--input",
        s(&csv),
        "--profile",
        "synth-cse2018",
        "--format",
        "json",
    ]);
    let stats: serde_json::Value = serde_json::from_str(&stats).unwrap();
    assert_eq!(stats["classes"].as_array().unwrap().len(), 7);
}

#[test]
fn train_save_and_eval_agree() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("flows.csv");
    ok(&[
        "synth",
        "--rows",
        "20000",
        "--profile",
        "cse2018",
        "--seed",
        "3",
        "--out",
        s(&csv),
    ]);
    let model = dir.path().join("dt.json");
    let trained = ok(&[
        "train",
        "--input",
        s(&csv),
        "--profile",
        "synth-cse2018",
        "--model",
        "dt",
        "--model-out",
        s(&model),
        "--seed",
        "3",
    ]);
    let evaluated = ok(&[
        "eval",
        "--model",
        s(&model),
        "--input",
        s(&csv),
        "--profile",
        "synth-cse2018",
        "--seed",
        "3",
    ]);
    let metrics = |text: &str| {
        text.lines()
            .nth(1)
            .unwrap()
            .split(',')
            .skip(1)
            .map(str::to_string)
            .collect::<Vec<_>>()
    };
    assert_eq!(metrics(&trained), metrics(&evaluated));
    let acc: f64 = metrics(&trained)[0].parse().unwrap();
    assert!(acc >= 0.99);

    let gbt = ok(&[
        "train",
        "--input",
        s(&csv),
        "--profile",
        "synth-cse2018",
        "--model",
        "baseline",
        "--format",
        "md",
    ]);
    assert!(gbt.contains("| Majority |"));
}

#[test]
fn tune_prints_best_point() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("flows.csv");
    ok(&[
        "synth",
        "--rows",
        "50000",
        "--profile",
        "cse2018",
        "--seed",
        "5",
        "--out",
        s(&csv),
    ]);
    let out = dir.path().join("tune");
    let text = ok(&[
        "tune",
        "--input",
        s(&csv),
        "--profile",
        "synth-cse2018",
        "--particles",
        "5",
        "--iterations",
        "4",
        "--out",
        s(&out),
    ]);
    assert!(text.starts_with("best max_depth="), "{text}");
    let trace = std::fs::read_to_string(out.join("tuning_trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 5);
}

#[test]
fn report_from_config_then_from_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.json");
    std::fs::write(
        &config,
        r#"{"seed": 4, "dataset": {"source": "synth", "preset": "cse2018", "n_rows": 8000},
            "models": [{"kind": "decision_tree"}, {"kind": "baseline"}]}"#,
    )
    .unwrap();
    let run_a = dir.path().join("a");
    let run_b = dir.path().join("b");
    ok(&[
        "report",
        "--config",
        s(&config),
        "--out",
        s(&run_a),
        "--format",
        "csv,md",
    ]);
    ok(&["report", "--config", s(&config), "--out", s(&run_b), "--seed", "5"]);
    assert!(run_a.join("metrics.md").is_file());
    let cross = dir.path().join("cross");
    ok(&[
        "report",
        "--manifests",
        s(&run_a.join("manifest.json")),
        s(&run_b.join("manifest.json")),
        "--out",
        s(&cross),
    ]);
    let table = std::fs::read_to_string(cross.join("cross_dataset.csv")).unwrap();
    assert!(table.starts_with("Classifier,Accuracy,Precision,Recall,F1-Score,Average"));
}

#[test]
fn exit_codes() {
    assert_eq!(flowgate(&["--help"]).status.code(), Some(0));
    assert_eq!(flowgate(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(flowgate(&["synth"]).status.code(), Some(1));
    assert_eq!(
        flowgate(&["synth", "--rows", "10", "--profile", "nope"]).status.code(),
        Some(1)
    );
    let missing = flowgate(&["ingest", "--input", "/nonexistent/flows.csv"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(!missing.stderr.is_empty());

    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.json");
    std::fs::write(
        &config,
        r#"{"seed": 1, "dataset": {"source": "csv", "path": "/nonexistent.csv", "profile": "cse2018"}, "models": [{"kind": "baseline"}]}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    assert_eq!(
        flowgate(&["report", "--config", s(&config), "--out", s(&out)])
            .status
            .code(),
        Some(2)
    );
    assert!(out.join("manifest.partial.json").is_file());
}

#[test]
fn schema_matches_committed_file() {
    let printed = ok(&["schema"]);
    let committed = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../schema/experiment.schema.json"
    ))
    .unwrap();
    assert_eq!(printed.trim_end(), committed.trim_end());
}
