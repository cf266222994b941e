//! Confusion-matrix metrics and ROC/AUC.
//!
//! Lying is the positive class. Note the naming convention of the metric
//! set: `dr` is TP/(TP+FP) — precision on the lying class, not recall —
//! while `tpr` is the usual recall. `fa` and `fpr` are defined over the
//! same counts and are always equal; both are kept for reporting clarity.

use thiserror::Error;

use crate::dataset::Label;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("labels and predictions differ in length ({labels} vs {predictions})")]
    LengthMismatch { labels: usize, predictions: usize },
    #[error("empty input")]
    Empty,
    #[error("metric {0} undefined: zero denominator")]
    Undefined(&'static str),
    #[error("ROC needs both classes present")]
    SingleClass,
}

/// Binary confusion counts with lying as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub true_pos: u64,
    pub true_neg: u64,
    pub false_pos: u64,
    pub false_neg: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.true_pos + self.true_neg + self.false_pos + self.false_neg
    }
}

/// The metric set derived from a confusion matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSet {
    /// (TP + TN) / total.
    pub acc: f64,
    /// TP / (TP + FN).
    pub tpr: f64,
    /// FP / (FP + TN).
    pub fpr: f64,
    /// TP / (TP + FP): precision on the lying class.
    pub dr: f64,
    /// FP / (TN + FP); identical to `fpr` by definition.
    pub fa: f64,
    /// DR - FA.
    pub hd: f64,
    /// Area under the ROC curve, when computed separately.
    pub auc: Option<f64>,
}

/// Counts prediction outcomes against ground truth.
pub fn confusion(labels: &[Label], predicted: &[Label]) -> Result<ConfusionCounts, EvalError> {
    if labels.len() != predicted.len() {
        return Err(EvalError::LengthMismatch {
            labels: labels.len(),
            predictions: predicted.len(),
        });
    }
    if labels.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut c = ConfusionCounts {
        true_pos: 0,
        true_neg: 0,
        false_pos: 0,
        false_neg: 0,
    };
    for (&truth, &pred) in labels.iter().zip(predicted) {
        match (truth, pred) {
            (Label::Lying, Label::Lying) => c.true_pos += 1,
            (Label::Honest, Label::Honest) => c.true_neg += 1,
            (Label::Honest, Label::Lying) => c.false_pos += 1,
            (Label::Lying, Label::Honest) => c.false_neg += 1,
        }
    }
    Ok(c)
}

/// Derives the full metric set; errors name the first undefined metric.
pub fn metrics(c: &ConfusionCounts) -> Result<MetricSet, EvalError> {
    let ratio = |num: u64, den: u64, name: &'static str| {
        if den == 0 {
            Err(EvalError::Undefined(name))
        } else {
            Ok(num as f64 / den as f64)
        }
    };
    let acc = ratio(c.true_pos + c.true_neg, c.total(), "acc")?;
    let tpr = ratio(c.true_pos, c.true_pos + c.false_neg, "tpr")?;
    let fpr = ratio(c.false_pos, c.false_pos + c.true_neg, "fpr")?;
    let dr = ratio(c.true_pos, c.true_pos + c.false_pos, "dr")?;
    let fa = ratio(c.false_pos, c.true_neg + c.false_pos, "fa")?;
    Ok(MetricSet {
        acc,
        tpr,
        fpr,
        dr,
        fa,
        hd: dr - fa,
        auc: None,
    })
}

/// One point of the ROC curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    /// Score threshold that produces this point (NaN for the origin).
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC curve and AUC from lying-probability scores.
///
/// Thresholds sweep the unique scores in descending order with ties
/// grouped into a single step; the area is the trapezoid rule over the
/// resulting (FPR, TPR) polyline.
pub fn roc_auc(scores: &[f64], labels: &[Label]) -> Result<(Vec<RocPoint>, f64), EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            labels: labels.len(),
            predictions: scores.len(),
        });
    }
    let pos_total = labels.iter().filter(|&&l| l == Label::Lying).count() as f64;
    let neg_total = labels.len() as f64 - pos_total;
    if pos_total == 0.0 || neg_total == 0.0 {
        return Err(EvalError::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());

    let mut points = vec![RocPoint {
        threshold: f64::NAN,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut auc = 0.0;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        // Consume the whole tie group at this score.
        let mut j = i;
        while j < order.len() && scores[order[j]] == threshold {
            match labels[order[j]] {
                Label::Lying => tp += 1.0,
                Label::Honest => fp += 1.0,
            }
            j += 1;
        }
        let prev = *points.last().unwrap();
        let point = RocPoint {
            threshold,
            fpr: fp / neg_total,
            tpr: tp / pos_total,
        };
        auc += (point.fpr - prev.fpr) * (point.tpr + prev.tpr) / 2.0;
        points.push(point);
        i = j;
    }
    Ok((points, auc))
}
