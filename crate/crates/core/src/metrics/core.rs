//! Weighted confusion accumulation and the base classification metrics.
//!
//! Every label metric derives from a [`ConfusionAccumulator`] whose cells hold
//! summed sample weights (rows are ground truth, columns predictions). Ranking
//! metrics (AP, AUC) work one-vs-rest on [`RankedScores`]. Ratios with a zero
//! denominator evaluate to 0.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predlog::EvalRow;
use crate::sampler::Task;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionAccumulator {
    n_classes: usize,
    counts: Vec<f64>,
    total_weight: f64,
}

impl ConfusionAccumulator {
    pub fn new(n_classes: usize) -> Self {
        ConfusionAccumulator {
            n_classes,
            counts: vec![0.0; n_classes * n_classes],
            total_weight: 0.0,
        }
    }

    /// Builds a matrix from `(ground truth, predicted, weight)` triples.
    pub fn from_pairs(n_classes: usize, pairs: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut cm = ConfusionAccumulator::new(n_classes);
        for (gt, pred, w) in pairs {
            cm.add(gt, pred, w);
        }
        cm
    }

    pub fn add(&mut self, gt: usize, pred: usize, weight: f64) {
        assert!(gt < self.n_classes && pred < self.n_classes, "class index out of range");
        self.counts[gt * self.n_classes + pred] += weight;
        self.total_weight += weight;
    }

    /// Entrywise sum with another matrix of the same size.
    pub fn merge(&mut self, other: &ConfusionAccumulator) {
        assert_eq!(self.n_classes, other.n_classes);
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total_weight += other.total_weight;
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn get(&self, gt: usize, pred: usize) -> f64 {
        self.counts[gt * self.n_classes + pred]
    }

    pub fn row_sum(&self, gt: usize) -> f64 {
        (0..self.n_classes).map(|p| self.get(gt, p)).sum()
    }

    pub fn col_sum(&self, pred: usize) -> f64 {
        (0..self.n_classes).map(|g| self.get(g, pred)).sum()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n_classes).map(|c| self.get(c, c)).sum()
    }

    /// Classes with non-zero ground-truth weight.
    pub fn present_classes(&self) -> Vec<usize> {
        (0..self.n_classes).filter(|&c| self.row_sum(c) > 0.0).collect()
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Confusion matrix over argmax predictions; ties pick the lowest class.
pub fn accumulate(rows: &[EvalRow]) -> Result<ConfusionAccumulator> {
    let first = rows.first().ok_or(Error::EmptyInput("no rows to accumulate"))?;
    let task = first.sample.task;
    let n = first.pred.confidences.len();
    let mut cm = ConfusionAccumulator::new(n);
    for row in rows {
        if row.sample.task != task {
            return Err(Error::MixedTasks(task, row.sample.task));
        }
        if row.pred.confidences.len() != n || row.gt() >= n {
            return Err(Error::ArityMismatch {
                context: row.sample.sample_id.clone(),
                task,
                expected: n,
                actual: row.pred.confidences.len(),
            });
        }
        cm.add(row.gt(), row.predicted(), row.weight);
    }
    Ok(cm)
}

pub fn accuracy(cm: &ConfusionAccumulator) -> f64 {
    ratio(cm.trace(), cm.total_weight())
}

/// Mean recall over classes that occur in the ground truth.
pub fn balanced_accuracy(cm: &ConfusionAccumulator) -> f64 {
    let present = cm.present_classes();
    if present.is_empty() {
        return 0.0;
    }
    present.iter().map(|&c| recall(cm, c)).sum::<f64>() / present.len() as f64
}

pub fn precision(cm: &ConfusionAccumulator, cls: usize) -> f64 {
    ratio(cm.get(cls, cls), cm.col_sum(cls))
}

pub fn recall(cm: &ConfusionAccumulator, cls: usize) -> f64 {
    ratio(cm.get(cls, cls), cm.row_sum(cls))
}

pub fn f1(cm: &ConfusionAccumulator, cls: usize) -> f64 {
    let (p, r) = (precision(cm, cls), recall(cm, cls));
    ratio(2.0 * p * r, p + r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryMetrics {
    pub acc: f64,
    pub bacc: f64,
    pub prec: f64,
    pub f1: f64,
}

/// Binary metrics with class 1 (crossing) as the positive class.
pub fn binary_metrics_positive(cm: &ConfusionAccumulator) -> Result<BinaryMetrics> {
    if cm.n_classes() != 2 {
        return Err(Error::ArityMismatch {
            context: "binary metrics".into(),
            task: Task::Action,
            expected: 2,
            actual: cm.n_classes(),
        });
    }
    Ok(BinaryMetrics {
        acc: accuracy(cm),
        bacc: balanced_accuracy(cm),
        prec: precision(cm, 1),
        f1: f1(cm, 1),
    })
}

/// Label metrics summarised the way reports show them: positive class for
/// binary tasks, macro mean over present classes otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelMetrics {
    pub acc: f64,
    pub bacc: f64,
    pub prec: f64,
    pub recall: f64,
    pub f1: f64,
}

impl LabelMetrics {
    pub fn from_confusion(cm: &ConfusionAccumulator) -> Self {
        let (prec, rec, f) = if cm.n_classes() == 2 {
            (precision(cm, 1), recall(cm, 1), f1(cm, 1))
        } else {
            let present = cm.present_classes();
            let k = present.len().max(1) as f64;
            let mean = |m: &dyn Fn(usize) -> f64| present.iter().map(|&c| m(c)).sum::<f64>() / k;
            (
                mean(&|c| precision(cm, c)),
                mean(&|c| recall(cm, c)),
                mean(&|c| f1(cm, c)),
            )
        };
        LabelMetrics {
            acc: accuracy(cm),
            bacc: balanced_accuracy(cm),
            prec,
            recall: rec,
            f1: f,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreEntry {
    pub score: f64,
    pub is_positive: bool,
    pub weight: f64,
}

/// One-vs-rest scores for a single class.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RankedScores {
    pub entries: Vec<ScoreEntry>,
}

impl RankedScores {
    pub fn push(&mut self, score: f64, is_positive: bool, weight: f64) {
        self.entries.push(ScoreEntry {
            score,
            is_positive,
            weight,
        });
    }

    pub fn positive_weight(&self) -> f64 {
        self.entries.iter().filter(|e| e.is_positive).map(|e| e.weight).sum()
    }

    pub fn negative_weight(&self) -> f64 {
        self.entries.iter().filter(|e| !e.is_positive).map(|e| e.weight).sum()
    }

    /// Scores of class `cls` against every other class.
    pub fn for_class(rows: &[EvalRow], cls: usize) -> Self {
        let mut out = RankedScores::default();
        for row in rows {
            out.push(row.pred.confidences[cls], row.gt() == cls, row.weight);
        }
        out
    }
}

/// Non-interpolated average precision: `sum_k (R_k - R_{k-1}) * P_k` over the
/// list ranked by descending score. Equal scores keep their input order.
/// `None` when the class has no positive weight.
pub fn average_precision(scores: &RankedScores) -> Option<f64> {
    let total_pos = scores.positive_weight();
    if total_pos <= 0.0 {
        return None;
    }
    let mut ranked: Vec<&ScoreEntry> = scores.entries.iter().collect();
    ranked.sort_by(|a, b| b.score.total_cmp(&a.score));
    let (mut tp, mut seen, mut ap) = (0.0, 0.0, 0.0);
    for e in ranked {
        seen += e.weight;
        if e.is_positive {
            tp += e.weight;
            if seen > 0.0 {
                ap += e.weight / total_pos * (tp / seen);
            }
        }
    }
    Some(ap)
}

/// ROC AUC as the normalized Mann-Whitney statistic, with half credit for
/// tied positive/negative pairs. `None` unless both sides carry weight.
pub fn auc(scores: &RankedScores) -> Option<f64> {
    let (pos, neg) = (scores.positive_weight(), scores.negative_weight());
    if pos <= 0.0 || neg <= 0.0 {
        return None;
    }
    let mut ranked: Vec<&ScoreEntry> = scores.entries.iter().collect();
    ranked.sort_by(|a, b| a.score.total_cmp(&b.score));
    let mut neg_below = 0.0;
    let mut concordant = 0.0;
    let mut i = 0;
    while i < ranked.len() {
        let mut j = i;
        let (mut pos_tied, mut neg_tied) = (0.0, 0.0);
        while j < ranked.len() && ranked[j].score.total_cmp(&ranked[i].score) == Ordering::Equal {
            if ranked[j].is_positive {
                pos_tied += ranked[j].weight;
            } else {
                neg_tied += ranked[j].weight;
            }
            j += 1;
        }
        concordant += pos_tied * (neg_below + 0.5 * neg_tied);
        neg_below += neg_tied;
        i = j;
    }
    Some(concordant / (pos * neg))
}

fn n_classes(rows: &[EvalRow]) -> usize {
    rows.first().map_or(0, |r| r.pred.confidences.len())
}

/// Per-class AP, `None` for classes without positives.
pub fn per_class_ap(rows: &[EvalRow]) -> Vec<Option<f64>> {
    (0..n_classes(rows))
        .map(|c| average_precision(&RankedScores::for_class(rows, c)))
        .collect()
}

/// Per-class one-vs-rest AUC, `None` for degenerate classes.
pub fn per_class_auc(rows: &[EvalRow]) -> Vec<Option<f64>> {
    (0..n_classes(rows))
        .map(|c| auc(&RankedScores::for_class(rows, c)))
        .collect()
}

fn mean_defined(values: &[Option<f64>]) -> Option<f64> {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    }
}

/// Unweighted mean of per-class AP over classes with positives.
pub fn map(rows: &[EvalRow]) -> Option<f64> {
    let aps = per_class_ap(rows);
    for (c, ap) in aps.iter().enumerate() {
        if ap.is_none() {
            log::debug!("mAP: class {c} has no positives, skipped");
        }
    }
    mean_defined(&aps)
}

/// Class-1 AUC for binary tasks, otherwise the macro mean of one-vs-rest AUC.
pub fn macro_auc(rows: &[EvalRow]) -> Option<f64> {
    let aucs = per_class_auc(rows);
    if aucs.len() == 2 {
        return aucs[1];
    }
    for (c, a) in aucs.iter().enumerate() {
        if a.is_none() {
            log::debug!("AUC: class {c} lacks positives or negatives, skipped");
        }
    }
    mean_defined(&aucs)
}

/// One-vs-rest AUC averaged with ground-truth prevalence weights.
pub fn weighted_ovr_auc(rows: &[EvalRow]) -> Option<f64> {
    let aucs = per_class_auc(rows);
    if aucs.len() == 2 {
        return aucs[1];
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (c, a) in aucs.iter().enumerate() {
        if let Some(a) = a {
            let support = RankedScores::for_class(rows, c).positive_weight();
            num += support * a;
            den += support;
        }
    }
    (den > 0.0).then(|| num / den)
}

/// The base metric suite of a row set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseMetrics {
    pub acc: f64,
    pub bacc: f64,
    pub prec: f64,
    pub recall: f64,
    pub f1: f64,
    pub map: Option<f64>,
    pub auc: Option<f64>,
}

pub fn base_metrics(rows: &[EvalRow]) -> Result<BaseMetrics> {
    let cm = accumulate(rows)?;
    let l = LabelMetrics::from_confusion(&cm);
    Ok(BaseMetrics {
        acc: l.acc,
        bacc: l.bacc,
        prec: l.prec,
        recall: l.recall,
        f1: l.f1,
        map: map(rows),
        auc: macro_auc(rows),
    })
}
