use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use super::config::ReportFormat;
use super::run::RunManifest;
use crate::epso::trace_csv;
use crate::error::{Error, Result};
use crate::metrics::fmt9;

/// One classifier line of a metric table.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub classifier: String,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MetricRow {
    pub fn average(&self) -> f64 {
        (self.accuracy + self.precision + self.recall + self.f1) / 4.0
    }

    fn values(&self, with_average: bool) -> Vec<f64> {
        let mut v = vec![self.accuracy, self.precision, self.recall, self.f1];
        if with_average {
            v.push(self.average());
        }
        v
    }
}

pub fn metric_rows(manifest: &RunManifest) -> Vec<MetricRow> {
    manifest
        .results
        .iter()
        .map(|r| MetricRow {
            classifier: r.name.clone(),
            accuracy: r.report.accuracy,
            precision: r.report.precision,
            recall: r.report.recall,
            f1: r.report.f1,
        })
        .collect()
}

/// Per-classifier mean over manifests, each manifest weighted equally.
/// A classifier missing from some manifests is averaged over the rest.
pub fn averaged_rows(manifests: &[RunManifest]) -> Vec<MetricRow> {
    let mut order: Vec<String> = Vec::new();
    let mut sums: Vec<(MetricRow, usize)> = Vec::new();
    for m in manifests {
        for row in metric_rows(m) {
            match order.iter().position(|n| *n == row.classifier) {
                Some(i) => {
                    let (s, k) = &mut sums[i];
                    s.accuracy += row.accuracy;
                    s.precision += row.precision;
                    s.recall += row.recall;
                    s.f1 += row.f1;
                    *k += 1;
                }
                None => {
                    order.push(row.classifier.clone());
                    sums.push((row, 1));
                }
            }
        }
    }
    sums.into_iter()
        .map(|(s, k)| {
            let k = k as f64;
            MetricRow {
                accuracy: s.accuracy / k,
                precision: s.precision / k,
                recall: s.recall / k,
                f1: s.f1 / k,
                ..s
            }
        })
        .collect()
}

const METRIC_HEADER: [&str; 5] = ["Classifier", "Accuracy", "Precision", "Recall", "F1-Score"];

fn header(with_average: bool) -> Vec<&'static str> {
    let mut h = METRIC_HEADER.to_vec();
    if with_average {
        h.push("Average");
    }
    h
}

fn csv_string(records: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io("<csv buffer>", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Renders a metric table; every real has nine decimals.
pub fn render_table(
    rows: &[MetricRow],
    with_average: bool,
    format: ReportFormat,
    note: Option<&str>,
) -> Result<String> {
    let head = header(with_average);
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut c = vec![r.classifier.clone()];
            c.extend(r.values(with_average).into_iter().map(fmt9));
            c
        })
        .collect();
    match format {
        ReportFormat::Csv => csv_string(std::iter::once(head.iter().map(|s| s.to_string()).collect()).chain(cells)),
        ReportFormat::Md => {
            let mut out = String::new();
            if let Some(n) = note {
                out.push_str(&format!("_{n}_\n\n"));
            }
            out.push_str(&format!("| {} |\n", head.join(" | ")));
            out.push_str(&format!("|---|{}\n", "---:|".repeat(head.len() - 1)));
            for c in &cells {
                out.push_str(&format!("| {} |\n", c.join(" | ")));
            }
            Ok(out)
        }
        ReportFormat::Json => {
            let rows: Vec<Value> = cells
                .iter()
                .map(|c| {
                    let mut obj = Map::new();
                    obj.insert(head[0].into(), Value::String(c[0].clone()));
                    for (h, v) in head[1..].iter().zip(&c[1..]) {
                        let x: f64 = v.parse().expect("formatted real parses");
                        obj.insert((*h).into(), json!(x));
                    }
                    Value::Object(obj)
                })
                .collect();
            let mut doc = json!({ "columns": head, "rows": rows });
            if let Some(n) = note {
                doc["note"] = json!(n);
            }
            Ok(serde_json::to_string_pretty(&doc)? + "\n")
        }
    }
}

/// Long-form bar-chart series: one line per (classifier, metric).
pub fn bar_series_csv(rows: &[MetricRow]) -> Result<String> {
    let mut records = vec![vec!["classifier".to_string(), "metric".into(), "value".into()]];
    for r in rows {
        for (name, v) in METRIC_HEADER[1..].iter().zip(r.values(false)) {
            records.push(vec![r.classifier.clone(), name.to_string(), fmt9(v)]);
        }
    }
    csv_string(records)
}

/// Radar-chart series: one line per classifier.
pub fn radar_series_csv(rows: &[MetricRow]) -> Result<String> {
    let mut records = vec![["classifier", "Accuracy", "Precision", "Recall", "F1", "Average"]
        .map(String::from)
        .to_vec()];
    for r in rows {
        let mut rec = vec![r.classifier.clone()];
        rec.extend(r.values(true).into_iter().map(fmt9));
        records.push(rec);
    }
    csv_string(records)
}

fn per_class_csv(manifest: &RunManifest) -> Result<String> {
    let mut records = vec![["classifier", "class", "precision", "recall", "f1", "support"]
        .map(String::from)
        .to_vec()];
    for r in &manifest.results {
        for c in &r.report.per_class {
            records.push(vec![
                r.name.clone(),
                c.name.clone(),
                fmt9(c.precision),
                fmt9(c.recall),
                fmt9(c.f1),
                c.support.to_string(),
            ]);
        }
    }
    csv_string(records)
}

fn write(dir: &Path, name: &str, text: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(())
}

/// Swarm settings behind a tuned row. They are this tool's defaults or the
/// config's overrides, never values taken from elsewhere, so tables say so.
pub fn tuning_note(manifest: &RunManifest) -> Option<String> {
    let t = manifest.config.tuning.as_ref()?;
    let e = &t.epso;
    Some(format!(
        "{}: swarm settings are tool defaults unless overridden ({} particles, {} iterations, \
         inertia {}->{}, c1 {}, c2 {}); fitness is holdout accuracy on {:.0}% of the training split",
        t.name,
        e.n_particles,
        e.n_iterations,
        e.w_start,
        e.w_end,
        e.c1,
        e.c2,
        t.holdout_fraction * 100.0
    ))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub const EQUAL_WEIGHT_NOTE: &str = "each dataset weighted equally";

/// Writes the metric table, the table with the Average column, bar and
/// radar series, per-class metrics, and the tuning trace when present.
pub fn emit_reports(manifest: &RunManifest, dir: &Path, formats: &[ReportFormat]) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let rows = metric_rows(manifest);
    let note = tuning_note(manifest);
    let mut written = Vec::new();
    for &f in formats {
        let ext = f.extension();
        let note = note.as_deref();
        write(
            dir,
            &format!("metrics.{ext}"),
            &render_table(&rows, false, f, note)?,
            &mut written,
        )?;
        write(
            dir,
            &format!("summary.{ext}"),
            &render_table(&rows, true, f, note)?,
            &mut written,
        )?;
    }
    write(dir, "bars.csv", &bar_series_csv(&rows)?, &mut written)?;
    write(dir, "radar.csv", &radar_series_csv(&rows)?, &mut written)?;
    write(dir, "per_class.csv", &per_class_csv(manifest)?, &mut written)?;
    if let Some(t) = &manifest.tuning {
        write(dir, "tuning_trace.csv", &trace_csv(&t.space, &t.trace)?, &mut written)?;
    }
    Ok(written)
}

/// Cross-dataset summary from several manifests, datasets weighted equally.
pub fn emit_cross_dataset(manifests: &[RunManifest], dir: &Path, formats: &[ReportFormat]) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let rows = averaged_rows(manifests);
    let mut written = Vec::new();
    for &f in formats {
        let text = render_table(&rows, true, f, Some(EQUAL_WEIGHT_NOTE))?;
        write(dir, &format!("cross_dataset.{}", f.extension()), &text, &mut written)?;
    }
    write(dir, "cross_dataset_bars.csv", &bar_series_csv(&rows)?, &mut written)?;
    write(dir, "cross_dataset_radar.csv", &radar_series_csv(&rows)?, &mut written)?;
    Ok(written)
}

pub fn write_manifest(manifest: &RunManifest, dir: &Path) -> Result<()> {
    ensure_dir(dir)?;
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(manifest)? + "\n";
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows() -> Vec<MetricRow> {
        vec![
            MetricRow {
                classifier: "DT".into(),
                accuracy: 0.996709474,
                precision: 0.9967,
                recall: 0.996709474,
                f1: 0.9966,
            },
            MetricRow {
                classifier: "CNNs".into(),
                accuracy: 0.887517178,
                precision: 0.787686741,
                recall: 0.887517178,
                f1: 0.834627361,
            },
        ]
    }

    #[test]
    fn csv_table_has_nine_decimals() {
        let text = render_table(&rows(), false, ReportFormat::Csv, None).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "Classifier,Accuracy,Precision,Recall,F1-Score");
        assert_eq!(lines[2], "CNNs,0.887517178,0.787686741,0.887517178,0.834627361");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn average_column_is_mean_of_four() {
        let text = render_table(&rows(), true, ReportFormat::Csv, None).unwrap();
        let last: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        let r = &rows()[0];
        assert_eq!(last[5], fmt9((r.accuracy + r.precision + r.recall + r.f1) / 4.0));
    }

    #[test]
    fn json_and_md_render() {
        let j = render_table(&rows(), true, ReportFormat::Json, Some(EQUAL_WEIGHT_NOTE)).unwrap();
        let v: Value = serde_json::from_str(&j).unwrap();
        assert_eq!(v["rows"][1]["Precision"], json!(0.787686741));
        assert_eq!(v["note"], json!(EQUAL_WEIGHT_NOTE));
        let md = render_table(&rows(), false, ReportFormat::Md, None).unwrap();
        assert!(md.contains("| CNNs | 0.887517178 | 0.787686741 |"));
    }

    #[test]
    fn radar_and_bars_shapes() {
        let radar = radar_series_csv(&rows()).unwrap();
        assert_eq!(radar.lines().count(), 3);
        let bars = bar_series_csv(&rows()).unwrap();
        assert_eq!(bars.lines().count(), 1 + 2 * 4);
    }
}
