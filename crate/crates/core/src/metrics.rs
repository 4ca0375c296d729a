//! Confusion matrix and accuracy / precision / recall / F1 with per-class
//! and aggregated views.

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::dataset::ClassId;
use crate::error::{Error, Result};

/// `counts[i][j]` = rows of true class `i` predicted as `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
    pub class_names: Vec<String>,
}

/// One-vs-rest tallies for a single class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OneVsRest {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

pub fn confusion_matrix(y_true: &[ClassId], y_pred: &[ClassId], class_names: &[String]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    let k = class_names.len();
    let mut counts = vec![vec![0u64; k]; k];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        for label in [t, p] {
            if label as usize >= k {
                return Err(Error::LabelOutOfRange {
                    label: label as usize,
                    n_classes: k,
                });
            }
        }
        counts[t as usize][p as usize] += 1;
    }
    Ok(ConfusionMatrix {
        counts,
        class_names: class_names.to_vec(),
    })
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn support(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    pub fn predicted(&self, c: usize) -> u64 {
        self.counts.iter().map(|row| row[c]).sum()
    }

    pub fn one_vs_rest(&self, c: usize) -> OneVsRest {
        let tp = self.counts[c][c];
        let fp = self.predicted(c) - tp;
        let fn_ = self.support(c) - tp;
        OneVsRest {
            tp,
            fp,
            fn_,
            tn: self.total() - tp - fp - fn_,
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyDataset);
    }
    Ok(cm.trace() as f64 / total as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub name: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Per-class precision, recall and F1; each is 0 when its denominator is 0.
pub fn per_class_prf(cm: &ConfusionMatrix) -> Vec<ClassMetrics> {
    (0..cm.n_classes())
        .map(|c| {
            let o = cm.one_vs_rest(c);
            let precision = ratio(o.tp, o.tp + o.fp);
            let recall = ratio(o.tp, o.tp + o.fn_);
            ClassMetrics {
                name: cm.class_names[c].clone(),
                precision,
                recall,
                f1: harmonic(precision, recall),
                support: o.tp + o.fn_,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum AverageMode {
    #[default]
    Weighted,
    Macro,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: AverageMode,
    pub n_rows: u64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub average_of_four: f64,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: ConfusionMatrix,
}

/// Aggregates per-class metrics. Weighted mode weights each class by its
/// support; weighted recall is computed as `trace / total`, which is the
/// same quantity without the rounding of a weighted sum.
pub fn aggregate(cm: &ConfusionMatrix, mode: AverageMode) -> Result<EvalReport> {
    let acc = accuracy(cm)?;
    let per_class = per_class_prf(cm);
    let total = cm.total() as f64;
    let (precision, recall, f1) = match mode {
        AverageMode::Weighted => {
            let w =
                |m: fn(&ClassMetrics) -> f64| per_class.iter().map(|c| c.support as f64 * m(c)).sum::<f64>() / total;
            (w(|c| c.precision), acc, w(|c| c.f1))
        }
        AverageMode::Macro => {
            let k = per_class.len() as f64;
            let m = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / k;
            (m(|c| c.precision), m(|c| c.recall), m(|c| c.f1))
        }
    };
    Ok(EvalReport {
        mode,
        n_rows: cm.total(),
        accuracy: acc,
        precision,
        recall,
        f1,
        average_of_four: (acc + precision + recall + f1) / 4.0,
        per_class,
        confusion: cm.clone(),
    })
}

pub fn evaluate(
    y_true: &[ClassId],
    y_pred: &[ClassId],
    class_names: &[String],
    mode: AverageMode,
) -> Result<EvalReport> {
    aggregate(&confusion_matrix(y_true, y_pred, class_names)?, mode)
}

/// Fixed nine-decimal rendering used in every report table.
pub fn fmt9(x: f64) -> String {
    format!("{x:.9}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|c| format!("c{c}")).collect()
    }

    #[test]
    fn hand_counted_matrix() {
        let cm = confusion_matrix(&[0, 0, 1, 1], &[0, 1, 1, 1], &names(2)).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 1], vec![0, 2]]);
        assert_eq!(accuracy(&cm).unwrap(), 0.75);
        let pc = per_class_prf(&cm);
        assert!((pc[1].precision - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(pc[1].recall, 1.0);
        assert!((pc[1].f1 - 0.8).abs() < 1e-15);
        let o = cm.one_vs_rest(0);
        assert_eq!(o.tp + o.fp + o.fn_ + o.tn, 4);
    }

    #[test]
    fn perfect_is_diagonal() {
        let y = [0, 2, 1, 2];
        let cm = confusion_matrix(&y, &y, &names(3)).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 2]]);
        assert_eq!(accuracy(&cm).unwrap(), 1.0);
    }

    #[test]
    fn never_predicted_class_scores_zero() {
        let cm = confusion_matrix(&[0, 1], &[0, 0], &names(2)).unwrap();
        let pc = per_class_prf(&cm);
        assert_eq!((pc[1].precision, pc[1].recall, pc[1].f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn majority_predictor_closed_form() {
        let (benign, other) = (887_517_178u64, 112_482_822u64);
        let mut counts = vec![vec![0u64; 2]; 2];
        counts[0][0] = benign;
        counts[1][0] = other;
        let cm = ConfusionMatrix {
            counts,
            class_names: names(2),
        };
        let r = 0.887517178;
        let rep = aggregate(&cm, AverageMode::Weighted).unwrap();
        assert!((rep.precision - r * r).abs() < 1e-12);
        assert_eq!(rep.recall, r);
        assert!((rep.f1 - 2.0 * r * r / (1.0 + r)).abs() < 1e-12);
        assert_eq!(fmt9(rep.precision), "0.787686741");
        assert_eq!(fmt9(rep.recall), "0.887517178");
        // 2r^2/(1+r) = 0.83462736173 at this r; the nine-decimal value sits 1e-9 below
        assert!((rep.f1 - 0.834627361).abs() < 1e-9);
    }

    #[test]
    fn weighted_equals_macro_for_single_or_balanced_classes() {
        let one = confusion_matrix(&[0, 0], &[0, 0], &names(1)).unwrap();
        let (w, m) = (
            aggregate(&one, AverageMode::Weighted).unwrap(),
            aggregate(&one, AverageMode::Macro).unwrap(),
        );
        assert_eq!((w.precision, w.recall, w.f1), (m.precision, m.recall, m.f1));

        let cm = confusion_matrix(&[0, 0, 1, 1], &[0, 1, 1, 1], &names(2)).unwrap();
        let (w, m) = (
            aggregate(&cm, AverageMode::Weighted).unwrap(),
            aggregate(&cm, AverageMode::Macro).unwrap(),
        );
        assert!((w.precision - m.precision).abs() < 1e-15);
        assert!((w.recall - m.recall).abs() < 1e-15);
        assert!((w.f1 - m.f1).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            confusion_matrix(&[0], &[0, 1], &names(2)),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            confusion_matrix(&[0], &[2], &names(2)),
            Err(Error::LabelOutOfRange { label: 2, .. })
        ));
        let empty = confusion_matrix(&[], &[], &names(2)).unwrap();
        assert!(matches!(accuracy(&empty), Err(Error::EmptyDataset)));
    }
}
