//! Confusion matrices, ROC curves and derived scores.

use serde::{Deserialize, Serialize};

use super::{EvalError, Result};
use crate::simgait::Activity;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// `inf` for the starting point; written as `null` in JSON.
    #[serde(with = "threshold")]
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

mod threshold {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &f64, s: S) -> Result<S::Ok, S::Error> {
        if t.is_finite() {
            s.serialize_some(t)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// One-vs-rest ROC curve of a class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRoc {
    pub class: usize,
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// ROC points from sweeping a threshold down through every distinct score
/// (score >= threshold counts as positive). Starts at (0, 0) with an
/// infinite threshold and ends at (1, 1).
pub fn roc_curve(scores: &[f64], positive: &[bool]) -> Vec<RocPoint> {
    let n_pos = positive.iter().filter(|&&p| p).count() as f64;
    let n_neg = positive.len() as f64 - n_pos;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let rate = |k: f64, n: f64| if n > 0.0 { k / n } else { 0.0 };
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if positive[order[i]] {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold,
            fpr: rate(fp, n_neg),
            tpr: rate(tp, n_pos),
        });
    }
    points
}

/// Trapezoidal area under a ROC curve.
pub fn auc(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}

/// `[[tn, fp], [fn, tp]]` at a fixed threshold.
pub fn binary_confusion(scores: &[f64], positive: &[bool], threshold: f64) -> [[u64; 2]; 2] {
    let mut m = [[0; 2]; 2];
    for (&s, &p) in scores.iter().zip(positive) {
        m[p as usize][(s >= threshold) as usize] += 1;
    }
    m
}

/// Rows are true classes, columns predicted classes.
pub fn confusion_matrix(labels: &[usize], predicted: &[usize], n_classes: usize) -> Vec<Vec<u64>> {
    let mut m = vec![vec![0; n_classes]; n_classes];
    for (&y, &p) in labels.iter().zip(predicted) {
        m[y][p] += 1;
    }
    m
}

/// Two ways of scoring how well two classes are told apart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub classes: (usize, usize),
    /// Accuracy on the 2x2 block of the confusion matrix for the pair.
    pub restricted_accuracy: f64,
    /// Mean of the two classes' recalls over all predictions.
    pub mean_recall: f64,
}

pub fn pair_metrics(confusion: &[Vec<u64>], a: usize, b: usize) -> PairMetrics {
    let c = |i: usize, j: usize| confusion[i][j] as f64;
    let block = c(a, a) + c(a, b) + c(b, a) + c(b, b);
    let recall = |i: usize| {
        let total: u64 = confusion[i].iter().sum();
        if total == 0 {
            0.0
        } else {
            c(i, i) / total as f64
        }
    };
    PairMetrics {
        classes: (a, b),
        restricted_accuracy: if block > 0.0 {
            (c(a, a) + c(b, b)) / block
        } else {
            0.0
        },
        mean_recall: (recall(a) + recall(b)) / 2.0,
    }
}

/// Metrics of one trained model on the test windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run_seed: u64,
    pub accuracy: f64,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub confusion: Vec<Vec<u64>>,
    pub roc: Vec<ClassRoc>,
    /// Walking versus walking with the backpack.
    pub w_ww: PairMetrics,
}

impl RunReport {
    pub fn auc(&self, class: usize) -> f64 {
        self.roc[class].auc
    }
}

/// Scores one run from class probabilities.
pub fn evaluate_scores(
    probs: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    run_seed: u64,
) -> Result<RunReport> {
    if probs.len() != labels.len() {
        return Err(EvalError::InvalidConfig(format!(
            "{} score rows for {} labels",
            probs.len(),
            labels.len()
        )));
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= n_classes) {
        return Err(EvalError::InvalidConfig(format!(
            "label {y} outside {n_classes} classes"
        )));
    }
    for class in 0..n_classes {
        if !labels.contains(&class) {
            return Err(EvalError::EmptyClass { class });
        }
    }
    let predicted: Vec<usize> = probs.iter().map(|p| gaitnet::argmax(p)).collect();
    let confusion = confusion_matrix(labels, &predicted, n_classes);
    let correct: u64 = (0..n_classes).map(|i| confusion[i][i]).sum();
    let total = labels.len() as f64;
    let precision = (0..n_classes)
        .map(|j| {
            let col: u64 = (0..n_classes).map(|i| confusion[i][j]).sum();
            if col == 0 {
                0.0
            } else {
                confusion[j][j] as f64 / col as f64
            }
        })
        .collect();
    let recall = (0..n_classes)
        .map(|i| confusion[i][i] as f64 / confusion[i].iter().sum::<u64>() as f64)
        .collect();
    let roc = (0..n_classes)
        .map(|class| {
            let scores: Vec<f64> = probs.iter().map(|p| p[class]).collect();
            let positive: Vec<bool> = labels.iter().map(|&y| y == class).collect();
            let points = roc_curve(&scores, &positive);
            ClassRoc {
                class,
                auc: auc(&points),
                points,
            }
        })
        .collect();
    let w_ww = if n_classes > Activity::WW.label() {
        pair_metrics(&confusion, Activity::W.label(), Activity::WW.label())
    } else {
        pair_metrics(&confusion, 0, 1)
    };
    Ok(RunReport {
        run_seed,
        accuracy: correct as f64 / total,
        precision,
        recall,
        confusion,
        roc,
        w_ww,
    })
}
