//! Classification metrics, cross-validation, and the experiment suites.

mod cv;
mod experiments;

pub use cv::{
    run_cv, stratified_group_kfold, AggregatedMetrics, CVReport, CvSettings, MetricStats,
};
pub use experiments::{
    daily_baseline_experiment, per_stratum_eval, retrospective_last_day_eval, DailyBaselineConfig,
    DailyBaselineReport, DailyBaselineRow, DayAxis, StratumEvalRow,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("metric needs at least one sample")]
    Empty,
    #[error("scores and labels have different lengths")]
    LengthMismatch,
    #[error("metric undefined: only one class present")]
    SingleClass,
    #[error("metric undefined: no positive samples")]
    NoPositives,
    #[error("scores contain NaN")]
    InvalidScore,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("need at least 2 folds, got {0}")]
    InvalidFolds(usize),
    #[error("cannot split {n} patient(s) into {k} folds")]
    TooManyFolds { k: usize, n: usize },
    #[error("cohort must be imputed")]
    NotImputed,
    #[error("feature {0:?} not present in the cohort")]
    MissingFeature(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Predictor(#[from] crate::predictor::PredictorError),
    #[error(transparent)]
    Boost(#[from] crate::boosting::BoostError),
}

/// Which outcome counts as the positive class when reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PositiveClass {
    Died,
    Survived,
}

fn check_scores(scores: &[f64], labels: &[u8]) -> Result<(), MetricError> {
    if scores.is_empty() {
        return Err(MetricError::Empty);
    }
    if scores.len() != labels.len() {
        return Err(MetricError::LengthMismatch);
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(MetricError::InvalidScore);
    }
    Ok(())
}

/// Area under the ROC curve as the Mann-Whitney statistic: the fraction of
/// (positive, negative) pairs ranked correctly, ties counted half. Computed
/// via average ranks, which matches exhaustive pair counting exactly.
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64, MetricError> {
    check_scores(scores, labels)?;
    let n = scores.len();
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = n - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricError::SingleClass);
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("no NaN"));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        // average 1-based rank of the tie group [i, j]
        let avg_rank = (i + 1 + j + 1) as f64 / 2.0;
        for &r in &idx[i..=j] {
            if labels[r] == 1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

/// Area under the precision-recall curve in the average-precision
/// convention: `sum_k (R_k - R_{k-1}) * P_k` over descending score groups,
/// with tied scores processed as one block.
pub fn aupr(scores: &[f64], labels: &[u8]) -> Result<f64, MetricError> {
    check_scores(scores, labels)?;
    let n = scores.len();
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    if n_pos == 0 {
        return Err(MetricError::NoPositives);
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("no NaN"));
    let mut ap = 0.0;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut prev_recall = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        for &r in &idx[i..=j] {
            if labels[r] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
        }
        let recall = tp as f64 / n_pos as f64;
        let precision = tp as f64 / (tp + fp) as f64;
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
        i = j + 1;
    }
    Ok(ap)
}

/// Confusion counts plus the derived rates at one decision threshold.
/// Prediction rule: positive-class score `>= threshold`. Undefined rates
/// (zero denominators) are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMetrics {
    pub threshold: f64,
    pub positive: PositiveClass,
    pub true_positives: usize,
    pub false_positives: usize,
    pub true_negatives: usize,
    pub false_negatives: usize,
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub specificity: Option<f64>,
    pub f1: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    if den == 0 {
        None
    } else {
        Some(num as f64 / den as f64)
    }
}

/// Confusion metrics of death-probability `scores` against died=1 `labels`.
/// With `PositiveClass::Survived` both scores and labels are complemented,
/// reproducing the survived-as-positive reporting orientation.
pub fn threshold_metrics(
    scores: &[f64],
    labels: &[u8],
    threshold: f64,
    positive: PositiveClass,
) -> ThresholdMetrics {
    let mut tp = 0;
    let mut fp = 0;
    let mut tn = 0;
    let mut fn_ = 0;
    for (&s, &l) in scores.iter().zip(labels) {
        let (score, label) = match positive {
            PositiveClass::Died => (s, l == 1),
            PositiveClass::Survived => (1.0 - s, l == 0),
        };
        let predicted = score >= threshold;
        match (predicted, label) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let total = tp + fp + tn + fn_;
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };
    ThresholdMetrics {
        threshold,
        positive,
        true_positives: tp,
        false_positives: fp,
        true_negatives: tn,
        false_negatives: fn_,
        accuracy: if total == 0 { 0.0 } else { (tp + tn) as f64 / total as f64 },
        precision,
        recall,
        specificity: ratio(tn, tn + fp),
        f1,
    }
}

/// Full metric set for one score/label sample; ranking metrics are `None`
/// when undefined (single class).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub auroc: Option<f64>,
    pub aupr: Option<f64>,
    pub accuracy: Option<f64>,
    pub f1: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub specificity: Option<f64>,
    pub n_pos: usize,
    pub n_neg: usize,
}

impl Metrics {
    pub fn undefined() -> Self {
        Metrics {
            auroc: None,
            aupr: None,
            accuracy: None,
            f1: None,
            precision: None,
            recall: None,
            specificity: None,
            n_pos: 0,
            n_neg: 0,
        }
    }
}

/// Compute [`Metrics`] in the requested orientation from death-probability
/// scores and died=1 labels.
pub fn compute_metrics(
    scores: &[f64],
    labels: &[u8],
    threshold: f64,
    positive: PositiveClass,
) -> Metrics {
    let (oriented_scores, oriented_labels): (Vec<f64>, Vec<u8>) = match positive {
        PositiveClass::Died => (scores.to_vec(), labels.to_vec()),
        PositiveClass::Survived => (
            scores.iter().map(|s| 1.0 - s).collect(),
            labels.iter().map(|l| 1 - l).collect(),
        ),
    };
    let n_pos = oriented_labels.iter().filter(|&&l| l == 1).count();
    let n_neg = oriented_labels.len() - n_pos;
    let t = threshold_metrics(scores, labels, threshold, positive);
    Metrics {
        auroc: auroc(&oriented_scores, &oriented_labels).ok(),
        aupr: aupr(&oriented_scores, &oriented_labels).ok(),
        accuracy: if oriented_labels.is_empty() { None } else { Some(t.accuracy) },
        f1: t.f1,
        precision: t.precision,
        recall: t.recall,
        specificity: t.specificity,
        n_pos,
        n_neg,
    }
}
