//! Confusion matrix, per-class precision/recall/F1, accuracy, ROC and AUC.
//!
//! The confusion matrix is indexed `[predicted][actual]`. Per-class figures
//! are one-vs-rest reductions of it.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// `counts[predicted][actual]`
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = counts.len();
        if k == 0 || counts.iter().any(|r| r.len() != k) {
            return Err(Error::Input(
                "confusion matrix must be square and non-empty".into(),
            ));
        }
        Ok(Self { counts })
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes()).map(|k| self.counts[k][k]).sum()
    }

    /// Samples predicted as `k` (row sum).
    pub fn predicted_total(&self, k: usize) -> u64 {
        self.counts[k].iter().sum()
    }

    /// Samples whose ground truth is `k` (column sum).
    pub fn actual_total(&self, k: usize) -> u64 {
        self.counts.iter().map(|r| r[k]).sum()
    }

    pub fn true_positives(&self, k: usize) -> u64 {
        self.counts[k][k]
    }

    pub fn false_positives(&self, k: usize) -> u64 {
        self.predicted_total(k) - self.true_positives(k)
    }

    pub fn false_negatives(&self, k: usize) -> u64 {
        self.actual_total(k) - self.true_positives(k)
    }

    pub fn true_negatives(&self, k: usize) -> u64 {
        self.total() - self.predicted_total(k) - self.actual_total(k) + self.true_positives(k)
    }
}

pub fn confusion(predictions: &[usize], labels: &[usize], num_classes: usize) -> Result<ConfusionMatrix> {
    if predictions.len() != labels.len() {
        return Err(Error::Input(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if num_classes == 0 {
        return Err(Error::Input("num_classes must be positive".into()));
    }
    let mut counts = vec![vec![0u64; num_classes]; num_classes];
    for (i, (&p, &a)) in predictions.iter().zip(labels).enumerate() {
        if p >= num_classes || a >= num_classes {
            return Err(Error::Input(format!(
                "pair {i} (predicted {p}, actual {a}) out of range for {num_classes} classes"
            )));
        }
        counts[p][a] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when any of the three had a zero denominator (and was reported as 0).
    pub degenerate: bool,
}

fn ratio(num: f64, den: f64, degenerate: &mut bool) -> f64 {
    if den == 0.0 {
        *degenerate = true;
        0.0
    } else {
        num / den
    }
}

pub fn class_metrics(cm: &ConfusionMatrix, k: usize) -> Result<ClassMetrics> {
    if k >= cm.num_classes() {
        return Err(Error::Input(format!("class {k} out of range")));
    }
    let tp = cm.true_positives(k) as f64;
    let mut degenerate = false;
    let precision = ratio(tp, cm.predicted_total(k) as f64, &mut degenerate);
    let recall = ratio(tp, cm.actual_total(k) as f64, &mut degenerate);
    let f1 = ratio(2.0 * precision * recall, precision + recall, &mut degenerate);
    Ok(ClassMetrics {
        precision,
        recall,
        f1,
        degenerate,
    })
}

/// Correct predictions over all evaluated samples (`trace / total`).
pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Input("accuracy of an empty confusion matrix".into()));
    }
    Ok(cm.trace() as f64 / total as f64)
}

/// `trace / declared_n`, for reports whose declared sample count differs
/// from the matrix total.
pub fn accuracy_over(cm: &ConfusionMatrix, declared_n: u64) -> Result<f64> {
    if declared_n == 0 {
        return Err(Error::Input("declared sample count is zero".into()));
    }
    Ok(cm.trace() as f64 / declared_n as f64)
}

// ---------------------------------------------------------------------------
// ROC / AUC
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

impl RocCurve {
    /// Trapezoidal area under the curve.
    pub fn area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
            .sum()
    }
}

/// ROC curve from a descending threshold sweep, and AUC from the rank statistic.
///
/// Tied scores form one threshold step (a diagonal segment). The AUC is the
/// probability that a random positive outscores a random negative, with
/// ties counted as one half.
pub fn roc_and_auc(scores: &[f64], labels: &[bool]) -> Result<(RocCurve, f64)> {
    if scores.len() != labels.len() {
        return Err(Error::Input(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Input("NaN score".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedAuc);
    }
    Ok((
        roc_curve(scores, labels, pos, neg),
        rank_auc(scores, labels, pos, neg),
    ))
}

fn roc_curve(scores: &[f64], labels: &[bool], pos: usize, neg: usize) -> RocCurve {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }
    RocCurve { points }
}

/// Mann-Whitney U / (pos * neg) with mid-ranks for ties.
fn rank_auc(scores: &[f64], labels: &[bool], pos: usize, neg: usize) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j share their mean
        let mid = (i + 1 + j) as f64 / 2.0;
        let tied_pos = order[i..j].iter().filter(|&&r| labels[r]).count();
        pos_rank_sum += mid * tied_pos as f64;
        i = j;
    }
    let p = pos as f64;
    (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * neg as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneVsRestAuc {
    /// `None` for classes absent from the labels (or present in every row).
    pub per_class: Vec<Option<f64>>,
    pub curves: Vec<Option<RocCurve>>,
    /// Mean over the defined classes.
    pub macro_average: Option<f64>,
}

pub fn one_vs_rest_auc(
    probabilities: &[Vec<f64>],
    labels: &[usize],
    num_classes: usize,
) -> Result<OneVsRestAuc> {
    if probabilities.len() != labels.len() {
        return Err(Error::Input(format!(
            "{} probability rows for {} labels",
            probabilities.len(),
            labels.len()
        )));
    }
    if let Some(row) = probabilities.iter().find(|r| r.len() != num_classes) {
        return Err(Error::Dimension {
            expected: num_classes,
            got: row.len(),
        });
    }
    let mut per_class = Vec::with_capacity(num_classes);
    let mut curves = Vec::with_capacity(num_classes);
    for k in 0..num_classes {
        let scores: Vec<f64> = probabilities.iter().map(|r| r[k]).collect();
        let binary: Vec<bool> = labels.iter().map(|&y| y == k).collect();
        match roc_and_auc(&scores, &binary) {
            Ok((curve, auc)) => {
                per_class.push(Some(auc));
                curves.push(Some(curve));
            }
            Err(Error::UndefinedAuc) => {
                per_class.push(None);
                curves.push(None);
            }
            Err(e) => return Err(e),
        }
    }
    let defined: Vec<f64> = per_class.iter().flatten().copied().collect();
    let macro_average = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
    Ok(OneVsRestAuc {
        per_class,
        curves,
        macro_average,
    })
}

// ---------------------------------------------------------------------------
// Evaluation bundle
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub degenerate: bool,
    pub auc: Option<f64>,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroAverages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: Option<f64>,
}

/// Everything reported about one set of predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<ClassReport>,
    pub macro_average: MacroAverages,
    /// `trace / total`
    pub accuracy: f64,
    pub declared_n: u64,
    /// `trace / declared_n`
    pub accuracy_over_declared_n: f64,
    pub test_error: f64,
    pub roc: Vec<Option<RocCurve>>,
}

pub fn evaluate(
    predictions: &[usize],
    probabilities: &[Vec<f64>],
    labels: &[usize],
    num_classes: usize,
    declared_n: u64,
) -> Result<Evaluation> {
    let cm = confusion(predictions, labels, num_classes)?;
    let ovr = one_vs_rest_auc(probabilities, labels, num_classes)?;
    let per_class = (0..num_classes)
        .map(|k| {
            let m = class_metrics(&cm, k)?;
            Ok(ClassReport {
                class: k,
                precision: m.precision,
                recall: m.recall,
                f1: m.f1,
                degenerate: m.degenerate,
                auc: ovr.per_class[k],
                support: cm.actual_total(k),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let k = num_classes as f64;
    let macro_average = MacroAverages {
        precision: per_class.iter().map(|c| c.precision).sum::<f64>() / k,
        recall: per_class.iter().map(|c| c.recall).sum::<f64>() / k,
        f1: per_class.iter().map(|c| c.f1).sum::<f64>() / k,
        auc: ovr.macro_average,
    };
    let acc = accuracy(&cm)?;
    Ok(Evaluation {
        accuracy_over_declared_n: accuracy_over(&cm, declared_n)?,
        confusion: cm,
        per_class,
        macro_average,
        accuracy: acc,
        declared_n,
        test_error: 1.0 - acc,
        roc: ovr.curves,
    })
}

/// ROC points as `fpr,tpr,class` rows.
pub fn write_roc_csv<W: std::io::Write>(roc: &[Option<RocCurve>], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["fpr", "tpr", "class"])?;
    for (k, curve) in roc.iter().enumerate() {
        for p in curve.iter().flat_map(|c| &c.points) {
            w.write_record([p.fpr.to_string(), p.tpr.to_string(), k.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Confusion counts with a `predicted` column followed by one column per actual class.
pub fn write_confusion_csv<W: std::io::Write>(cm: &ConfusionMatrix, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["predicted".to_string()];
    header.extend((0..cm.num_classes()).map(|k| format!("actual_{k}")));
    w.write_record(&header)?;
    for (p, row) in cm.counts.iter().enumerate() {
        let mut rec = vec![p.to_string()];
        rec.extend(row.iter().map(u64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
