//! Classification metrics: confusion matrix, one-vs-rest precision, recall
//! and F1, accuracy, per-epoch curves and report rendering.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::read_jsonl;
use crate::slicer::SliceLabel;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("y_true has {true_len} labels but y_pred has {pred_len}")]
    LengthMismatch { true_len: usize, pred_len: usize },
    #[error("label `{0}` is not among the classes")]
    UnknownLabel(String),
    #[error("no samples to evaluate")]
    EmptyInput,
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    /// `counts[i][j]`: samples of true class `i` predicted as `j`.
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    fn index(&self, class: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == class)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn check_lengths<T>(y_true: &[T], y_pred: &[T]) -> Result<(), EvalError> {
    if y_true.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch { true_len: y_true.len(), pred_len: y_pred.len() });
    }
    if y_true.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    Ok(())
}

pub fn confusion<S: AsRef<str>>(
    y_true: &[S],
    y_pred: &[S],
    classes: &[String],
) -> Result<ConfusionMatrix, EvalError> {
    check_lengths(y_true, y_pred)?;
    let index: HashMap<&str, usize> = classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let lookup =
        |l: &S| index.get(l.as_ref()).copied().ok_or_else(|| EvalError::UnknownLabel(l.as_ref().to_string()));
    let mut counts = vec![vec![0u64; classes.len()]; classes.len()];
    for (t, p) in y_true.iter().zip(y_pred) {
        counts[lookup(t)?][lookup(p)?] += 1;
    }
    Ok(ConfusionMatrix { classes: classes.to_vec(), counts })
}

/// One-vs-rest metrics for `class`; a zero denominator yields 0. Unknown
/// classes get all zeros.
pub fn precision_recall_f1(matrix: &ConfusionMatrix, class: &str) -> ClassMetrics {
    let Some(k) = matrix.index(class) else {
        return ClassMetrics { precision: 0.0, recall: 0.0, f1: 0.0, support: 0 };
    };
    let tp = matrix.counts[k][k];
    let row: u64 = matrix.counts[k].iter().sum();
    let col: u64 = matrix.counts.iter().map(|r| r[k]).sum();
    let (fn_, fp) = (row - tp, col - tp);
    ClassMetrics {
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
        f1: ratio(2 * tp, 2 * tp + fp + fn_),
        support: row,
    }
}

pub fn accuracy<S: AsRef<str>>(y_true: &[S], y_pred: &[S]) -> Result<f64, EvalError> {
    check_lengths(y_true, y_pred)?;
    let correct = y_true.iter().zip(y_pred).filter(|(t, p)| t.as_ref() == p.as_ref()).count();
    Ok(correct as f64 / y_true.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub accuracy: f64,
    pub per_class: IndexMap<String, ClassMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_class: IndexMap<String, ClassMetrics>,
    pub accuracy: f64,
    pub matrix: ConfusionMatrix,
    pub macro_avg: Averages,
    pub micro_avg: Averages,
    /// Value used when a metric's denominator is zero.
    pub zero_division: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curves: Option<BTreeMap<u32, EpochMetrics>>,
}

impl MetricsReport {
    pub fn from_matrix(matrix: ConfusionMatrix) -> Result<Self, EvalError> {
        let total = matrix.total();
        if total == 0 {
            return Err(EvalError::EmptyInput);
        }
        let per_class: IndexMap<String, ClassMetrics> =
            matrix.classes.iter().map(|c| (c.clone(), precision_recall_f1(&matrix, c))).collect();
        let n = per_class.len().max(1) as f64;
        let macro_avg = Averages {
            precision: per_class.values().map(|m| m.precision).sum::<f64>() / n,
            recall: per_class.values().map(|m| m.recall).sum::<f64>() / n,
            f1: per_class.values().map(|m| m.f1).sum::<f64>() / n,
        };
        // Single-label: micro P = R = F1 = accuracy.
        let acc = ratio(matrix.trace(), total);
        Ok(MetricsReport {
            per_class,
            accuracy: acc,
            micro_avg: Averages { precision: acc, recall: acc, f1: acc },
            macro_avg,
            matrix,
            zero_division: 0.0,
            curves: None,
        })
    }

    pub fn evaluate<S: AsRef<str>>(
        y_true: &[S],
        y_pred: &[S],
        classes: &[String],
    ) -> Result<Self, EvalError> {
        Self::from_matrix(confusion(y_true, y_pred, classes)?)
    }
}

/// A line of a predictions file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub slice_id: String,
    pub true_label: String,
    pub pred_label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epoch: Option<u32>,
}

pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>, EvalError> {
    Ok(read_jsonl(path)?)
}

/// Known labels in class order, then anything else alphabetically.
pub fn default_class_order<'a, I: IntoIterator<Item = &'a str>>(labels: I) -> Vec<String> {
    let mut known: Vec<SliceLabel> = Vec::new();
    let mut other: Vec<String> = Vec::new();
    for l in labels {
        match l.parse::<SliceLabel>() {
            Ok(s) => known.push(s),
            Err(_) => other.push(l.to_string()),
        }
    }
    known.sort_unstable();
    known.dedup();
    other.sort_unstable();
    other.dedup();
    known.iter().map(|l| l.to_string()).chain(other).collect()
}

/// Builds a report from predictions. Headline metrics use the last epoch
/// (or the epoch-less rows); with several epochs each one gets a curve point.
pub fn report_from_predictions(
    preds: &[Prediction],
    classes: Option<&[String]>,
) -> Result<MetricsReport, EvalError> {
    if preds.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let classes: Vec<String> = match classes {
        Some(c) => c.to_vec(),
        None => {
            default_class_order(preds.iter().flat_map(|p| [p.true_label.as_str(), p.pred_label.as_str()]))
        }
    };
    let mut by_epoch: BTreeMap<Option<u32>, (Vec<&str>, Vec<&str>)> = BTreeMap::new();
    for p in preds {
        let e = by_epoch.entry(p.epoch).or_default();
        e.0.push(&p.true_label);
        e.1.push(&p.pred_label);
    }
    let (last_true, last_pred) = by_epoch.values().next_back().expect("non-empty");
    let mut report = MetricsReport::evaluate(last_true, last_pred, &classes)?;
    let epochs: BTreeMap<u32, EpochMetrics> = by_epoch
        .iter()
        .filter_map(|(e, (t, p))| e.map(|e| (e, t, p)))
        .map(|(e, t, p)| {
            let r = MetricsReport::evaluate(t, p, &classes)?;
            Ok((e, EpochMetrics { accuracy: r.accuracy, per_class: r.per_class }))
        })
        .collect::<Result<_, EvalError>>()?;
    if epochs.len() > 1 {
        report.curves = Some(epochs);
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Plain,
    Json,
    Csv,
}

pub fn render_report(report: &MetricsReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Csv => {
            let mut s = String::from("class,precision,recall,f1,support\n");
            for (c, m) in &report.per_class {
                let _ = writeln!(s, "{c},{:.2},{:.2},{:.2},{}", m.precision, m.recall, m.f1, m.support);
            }
            s
        }
        ReportFormat::Plain => render_plain(report),
    }
}

fn render_plain(report: &MetricsReport) -> String {
    let width = report.per_class.keys().map(String::len).chain([5]).max().unwrap_or(5);
    let mut s = String::new();
    let _ = writeln!(s, "{:<width$}  precision  recall  f1    support", "class");
    for (c, m) in &report.per_class {
        let _ =
            writeln!(s, "{c:<width$}  {:<9.2}  {:<6.2}  {:<4.2}  {}", m.precision, m.recall, m.f1, m.support);
    }
    let _ = writeln!(s, "\naccuracy {:.2} ({} samples)", report.accuracy, report.matrix.total());

    let cells: Vec<String> = report
        .matrix
        .classes
        .iter()
        .cloned()
        .chain(report.matrix.counts.iter().flatten().map(u64::to_string))
        .collect();
    let cw = cells.iter().map(String::len).max().unwrap_or(1);
    let _ = write!(s, "\nconfusion (rows true, columns predicted)\n{:<width$}", "");
    for c in &report.matrix.classes {
        let _ = write!(s, "  {c:>cw$}");
    }
    s.push('\n');
    for (c, row) in report.matrix.classes.iter().zip(&report.matrix.counts) {
        let _ = write!(s, "{c:<width$}");
        for n in row {
            let _ = write!(s, "  {n:>cw$}");
        }
        s.push('\n');
    }
    s
}
