//! Confusion matrices, per-class scores, one-vs-rest curves and model
//! comparison tables.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mode::{DegradationMode, NUM_CLASSES};
use crate::pipeline::RawWindow;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// `counts[true][predicted]`.
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

pub fn confusion_matrix(truth: &[DegradationMode], predicted: &[DegradationMode]) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::Argument(format!(
            "{} true labels but {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let mut counts = [[0; NUM_CLASSES]; NUM_CLASSES];
    for (t, p) in truth.iter().zip(predicted) {
        counts[t.index()][p.index()] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..NUM_CLASSES).map(|c| self.counts[c][c]).sum()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["true\\predicted".to_string()];
        header.extend(DegradationMode::ALL.iter().map(|m| m.name().to_string()));
        w.write_record(&header)?;
        for mode in DegradationMode::ALL {
            let mut row = vec![mode.name().to_string()];
            row.extend(self.counts[mode.index()].iter().map(|c| c.to_string()));
            w.write_record(&row)?;
        }
        csv_string(w)
    }
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Argument(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: [f64; NUM_CLASSES],
    pub recall: [f64; NUM_CLASSES],
    pub f1: [f64; NUM_CLASSES],
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Zero denominators give zero scores; macro averages are unweighted.
pub fn class_metrics(cm: &ConfusionMatrix) -> Result<ClassMetrics> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Argument("confusion matrix is empty".into()));
    }
    let mut precision = [0.0; NUM_CLASSES];
    let mut recall = [0.0; NUM_CLASSES];
    let mut f1 = [0.0; NUM_CLASSES];
    for c in 0..NUM_CLASSES {
        let tp = cm.counts[c][c];
        let predicted: u64 = (0..NUM_CLASSES).map(|t| cm.counts[t][c]).sum();
        let actual: u64 = cm.counts[c].iter().sum();
        precision[c] = ratio(tp, predicted);
        recall[c] = ratio(tp, actual);
        let s = precision[c] + recall[c];
        f1[c] = if s > 0.0 {
            2.0 * precision[c] * recall[c] / s
        } else {
            0.0
        };
    }
    let mean = |v: &[f64; NUM_CLASSES]| v.iter().sum::<f64>() / NUM_CLASSES as f64;
    Ok(ClassMetrics {
        macro_precision: mean(&precision),
        macro_recall: mean(&recall),
        macro_f1: mean(&f1),
        precision,
        recall,
        f1,
        accuracy: ratio(cm.trace(), total),
    })
}

/// Accuracy after collapsing every fault class into one.
pub fn fault_accuracy(truth: &[DegradationMode], predicted: &[DegradationMode]) -> Result<f64> {
    if truth.len() != predicted.len() {
        return Err(Error::Argument("label and prediction counts differ".into()));
    }
    if truth.is_empty() {
        return Ok(0.0);
    }
    let hits = truth
        .iter()
        .zip(predicted)
        .filter(|(t, p)| t.is_fault() == p.is_fault())
        .count();
    Ok(hits as f64 / truth.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    Roc,
    Pr,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// Scores `>= threshold` count as positive; the first point uses `+inf`.
    pub threshold: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoints {
    pub kind: CurveKind,
    pub class: DegradationMode,
    pub points: Vec<CurvePoint>,
    pub auc: f64,
}

/// Trapezoidal area under `(x, y)` points taken in order.
pub fn auc(points: &[CurvePoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].x - w[0].x) * (w[1].y + w[0].y) / 2.0)
        .sum()
}

/// Cumulative (threshold, tp, fp) after each group of tied scores,
/// sweeping from the highest score down.
type Sweep = (Vec<(f64, u64, u64)>, u64, u64);

fn sweep(truth: &[DegradationMode], scores: &[[f64; NUM_CLASSES]], class: DegradationMode) -> Result<Sweep> {
    if truth.len() != scores.len() {
        return Err(Error::Argument("label and score counts differ".into()));
    }
    let c = class.index();
    if scores.iter().any(|s| !s[c].is_finite()) {
        return Err(Error::Curve {
            class: class.code(),
            message: "non-finite score".into(),
        });
    }
    let positives = truth.iter().filter(|&&t| t == class).count() as u64;
    let negatives = truth.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Curve {
            class: class.code(),
            message: format!("needs positives and negatives, found {positives} and {negatives}"),
        });
    }
    let mut order: Vec<usize> = (0..truth.len()).collect();
    order.sort_by(|&a, &b| scores[b][c].total_cmp(&scores[a][c]));
    let mut out = Vec::new();
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]][c];
        while i < order.len() && scores[order[i]][c] == threshold {
            if truth[order[i]] == class {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        out.push((threshold, tp, fp));
    }
    Ok((out, positives, negatives))
}

/// One-vs-rest ROC from `(0, 0)` to `(1, 1)`; tied scores form one step.
pub fn roc_curve(
    truth: &[DegradationMode],
    scores: &[[f64; NUM_CLASSES]],
    class: DegradationMode,
) -> Result<CurvePoints> {
    let (steps, pos, neg) = sweep(truth, scores, class)?;
    let mut points = vec![CurvePoint {
        threshold: f64::INFINITY,
        x: 0.0,
        y: 0.0,
    }];
    points.extend(steps.into_iter().map(|(threshold, tp, fp)| CurvePoint {
        threshold,
        x: fp as f64 / neg as f64,
        y: tp as f64 / pos as f64,
    }));
    let area = auc(&points);
    Ok(CurvePoints {
        kind: CurveKind::Roc,
        class,
        points,
        auc: area,
    })
}

/// One-vs-rest precision-recall curve (x = recall, y = precision),
/// anchored at `(0, 1)` and ending at recall 1.
pub fn pr_curve(
    truth: &[DegradationMode],
    scores: &[[f64; NUM_CLASSES]],
    class: DegradationMode,
) -> Result<CurvePoints> {
    let (steps, pos, _) = sweep(truth, scores, class)?;
    let mut points = vec![CurvePoint {
        threshold: f64::INFINITY,
        x: 0.0,
        y: 1.0,
    }];
    points.extend(steps.into_iter().map(|(threshold, tp, fp)| CurvePoint {
        threshold,
        x: tp as f64 / pos as f64,
        y: tp as f64 / (tp + fp) as f64,
    }));
    let area = auc(&points);
    Ok(CurvePoints {
        kind: CurveKind::Pr,
        class,
        points,
        auc: area,
    })
}

pub fn curves_to_csv(curves: &[CurvePoints]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["kind", "class", "threshold", "x", "y"])?;
    for curve in curves {
        let kind = match curve.kind {
            CurveKind::Roc => "roc",
            CurveKind::Pr => "pr",
        };
        for p in &curve.points {
            w.write_record([
                kind.to_string(),
                curve.class.name().to_string(),
                p.threshold.to_string(),
                p.x.to_string(),
                p.y.to_string(),
            ])?;
        }
    }
    csv_string(w)
}

/// Unscaled test windows; each predictor applies its own scaling.
#[derive(Debug, Clone, Copy)]
pub struct EvaluationSet<'a> {
    pub raw: &'a [RawWindow],
}

impl EvaluationSet<'_> {
    pub fn labels(&self) -> Vec<DegradationMode> {
        self.raw.iter().map(|w| w.label).collect()
    }
}

/// A predicted class and per-class scores for every window.
pub type Predictions = Vec<(DegradationMode, [f64; NUM_CLASSES])>;

pub trait Predictor {
    fn predict_set(&self, set: &EvaluationSet<'_>) -> Result<Predictions>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub name: String,
    pub confusion: ConfusionMatrix,
    pub metrics: ClassMetrics,
    pub fault_accuracy: f64,
    pub roc: Vec<CurvePoints>,
    pub pr: Vec<CurvePoints>,
    /// Classes whose curves could not be drawn, with the reason.
    pub skipped_curves: Vec<String>,
}

pub fn evaluate_predictions(name: &str, truth: &[DegradationMode], predictions: &Predictions) -> Result<ModelReport> {
    let predicted: Vec<DegradationMode> = predictions.iter().map(|p| p.0).collect();
    let scores: Vec<[f64; NUM_CLASSES]> = predictions.iter().map(|p| p.1).collect();
    let confusion = confusion_matrix(truth, &predicted)?;
    let metrics = class_metrics(&confusion)?;
    let mut roc = Vec::new();
    let mut pr = Vec::new();
    let mut skipped_curves = Vec::new();
    for class in DegradationMode::ALL {
        match (roc_curve(truth, &scores, class), pr_curve(truth, &scores, class)) {
            (Ok(r), Ok(p)) => {
                roc.push(r);
                pr.push(p);
            }
            (Err(e), _) | (_, Err(e)) => skipped_curves.push(e.to_string()),
        }
    }
    Ok(ModelReport {
        name: name.to_string(),
        fault_accuracy: fault_accuracy(truth, &predicted)?,
        confusion,
        metrics,
        roc,
        pr,
        skipped_curves,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    pub classification_accuracy: f64,
    pub fault_accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub seconds: f64,
}

impl ComparisonRow {
    pub fn from_report(report: &ModelReport, seconds: f64) -> Self {
        ComparisonRow {
            model: report.name.clone(),
            classification_accuracy: report.metrics.accuracy,
            fault_accuracy: report.fault_accuracy,
            macro_precision: report.metrics.macro_precision,
            macro_recall: report.metrics.macro_recall,
            macro_f1: report.metrics.macro_f1,
            seconds,
        }
    }
}

/// Accuracy descending, then model name.
pub fn sort_rows(rows: &mut [ComparisonRow]) {
    rows.sort_by(|a, b| {
        b.classification_accuracy
            .total_cmp(&a.classification_accuracy)
            .then_with(|| a.model.cmp(&b.model))
    });
}

/// Evaluates every predictor on the same set. Rows carry evaluation wall
/// time, reports are returned in the same order as the rows.
pub fn compare_models(
    models: &[(&str, &dyn Predictor)],
    set: &EvaluationSet<'_>,
) -> Result<Vec<(ComparisonRow, ModelReport)>> {
    let truth = set.labels();
    let mut out = Vec::with_capacity(models.len());
    for (name, model) in models {
        let start = Instant::now();
        let predictions = model.predict_set(set)?;
        let report = evaluate_predictions(name, &truth, &predictions)?;
        let row = ComparisonRow::from_report(&report, start.elapsed().as_secs_f64());
        out.push((row, report));
    }
    out.sort_by(|a, b| {
        b.0.classification_accuracy
            .total_cmp(&a.0.classification_accuracy)
            .then_with(|| a.0.model.cmp(&b.0.model))
    });
    Ok(out)
}

/// Comparison table without timing columns, so reruns compare byte for byte.
pub fn comparison_csv(rows: &[ComparisonRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "model",
        "classification_accuracy",
        "fault_accuracy",
        "macro_precision",
        "macro_recall",
        "macro_f1",
    ])?;
    for r in rows {
        w.write_record([
            r.model.clone(),
            format!("{:.6}", r.classification_accuracy),
            format!("{:.6}", r.fault_accuracy),
            format!("{:.6}", r.macro_precision),
            format!("{:.6}", r.macro_recall),
            format!("{:.6}", r.macro_f1),
        ])?;
    }
    csv_string(w)
}

pub fn timings_csv(rows: &[ComparisonRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["model", "seconds"])?;
    for r in rows {
        w.write_record([r.model.clone(), format!("{:.3}", r.seconds)])?;
    }
    csv_string(w)
}

pub fn comparison_table(rows: &[ComparisonRow]) -> String {
    let mut out = format!(
        "{:<12} {:>9} {:>9} {:>10} {:>10} {:>10}\n",
        "model", "accuracy", "fault_acc", "macro_p", "macro_r", "macro_f1"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<12} {:>9.4} {:>9.4} {:>10.4} {:>10.4} {:>10.4}\n",
            r.model, r.classification_accuracy, r.fault_accuracy, r.macro_precision, r.macro_recall, r.macro_f1
        ));
    }
    out
}
