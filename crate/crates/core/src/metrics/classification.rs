use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Posteriors;

/// Frame accuracy and its complement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub accuracy: f64,
    pub error_rate: f64,
}

impl Accuracy {
    pub fn from_accuracy(accuracy: f64) -> Self {
        Self {
            accuracy,
            error_rate: 1.0 - accuracy,
        }
    }

    /// Error rate in percent, rounded to one decimal.
    pub fn error_percent(&self) -> f64 {
        (self.error_rate * 1000.0).round() / 10.0
    }
}

pub(crate) fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a,
            actual: b,
            context: "predictions vs targets",
        });
    }
    Ok(())
}

/// Argmax accuracy (ties to the lowest class index).
pub fn frame_accuracy(posteriors: &Posteriors, targets: &[usize]) -> Result<Accuracy> {
    check_len(posteriors.frames(), targets.len())?;
    hard_accuracy(&posteriors.argmax(), targets)
}

pub fn hard_accuracy(predictions: &[usize], targets: &[usize]) -> Result<Accuracy> {
    check_len(predictions.len(), targets.len())?;
    if targets.is_empty() {
        return Err(Error::EmptyInput("targets"));
    }
    let correct = predictions.iter().zip(targets).filter(|(p, t)| p == t).count();
    Ok(Accuracy::from_accuracy(correct as f64 / targets.len() as f64))
}

/// `targets x predictions` frame counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Array2<u64>,
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.counts.nrows()
    }

    pub fn total(&self) -> u64 {
        self.counts.sum()
    }

    pub fn trace(&self) -> u64 {
        self.counts.diag().sum()
    }

    pub fn supports(&self) -> Vec<u64> {
        self.counts.rows().into_iter().map(|r| r.sum()).collect()
    }

    /// Each row divided by its support; empty rows stay zero.
    pub fn row_normalized(&self) -> Array2<f64> {
        let mut out = self.counts.mapv(|c| c as f64);
        for mut row in out.rows_mut() {
            let s = row.sum();
            if s > 0.0 {
                row /= s;
            }
        }
        out
    }
}

pub fn confusion_matrix(predictions: &[usize], targets: &[usize], n_classes: usize) -> Result<ConfusionMatrix> {
    check_len(predictions.len(), targets.len())?;
    let mut counts = Array2::zeros((n_classes, n_classes));
    for (&p, &t) in predictions.iter().zip(targets) {
        if p >= n_classes || t >= n_classes {
            return Err(Error::InvalidArgument(format!(
                "class index {} outside {n_classes} classes",
                p.max(t)
            )));
        }
        counts[[t, p]] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

/// Support-weighted mean of per-class F1 (F1 = 0 when precision + recall = 0).
pub fn weighted_f1(predictions: &[usize], targets: &[usize], n_classes: usize) -> Result<f64> {
    let cm = confusion_matrix(predictions, targets, n_classes)?;
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyInput("targets"));
    }
    let mut score = 0.0;
    for c in 0..n_classes {
        let tp = cm.counts[[c, c]] as f64;
        let support = cm.counts.row(c).sum() as f64;
        let predicted = cm.counts.column(c).sum() as f64;
        if support == 0.0 {
            continue;
        }
        let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let recall = tp / support;
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        score += support / total as f64 * f1;
    }
    Ok(score)
}
