use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Posteriors;

use super::classification::check_len;

/// One operating point per distinct score threshold, highest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub class: usize,
    pub thresholds: Vec<f64>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
}

impl PrCurve {
    /// Step-wise area `sum(delta recall * precision)`.
    pub fn area(&self) -> f64 {
        let mut prev = 0.0;
        let mut area = 0.0;
        for (&r, &p) in self.recall.iter().zip(&self.precision) {
            area += (r - prev) * p;
            prev = r;
        }
        area
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApReport {
    pub map: f64,
    pub per_class: Vec<f64>,
    /// Classes without positive frames (their AP is reported as 0).
    pub flagged: Vec<usize>,
}

fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(Ordering::Equal));
    order
}

/// Average precision with tied scores handled as one group.
pub fn average_precision(scores: &[f64], positives: &[bool]) -> Result<Option<f64>> {
    check_len(scores.len(), positives.len())?;
    let total_pos = positives.iter().filter(|&&p| p).count();
    if total_pos == 0 {
        return Ok(None);
    }
    let order = ranking(scores);
    let (mut tp, mut seen, mut ap, mut prev_recall) = (0usize, 0usize, 0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            tp += positives[order[i]] as usize;
            seen += 1;
            i += 1;
        }
        let recall = tp as f64 / total_pos as f64;
        ap += (recall - prev_recall) * (tp as f64 / seen as f64);
        prev_recall = recall;
    }
    Ok(Some(ap))
}

/// Per-class AP from posterior columns and the unweighted class mean.
pub fn mean_average_precision(posteriors: &Posteriors, targets: &[usize]) -> Result<ApReport> {
    check_len(posteriors.frames(), targets.len())?;
    let view = posteriors.view();
    let mut per_class = Vec::with_capacity(posteriors.n_classes());
    let mut flagged = Vec::new();
    for c in 0..posteriors.n_classes() {
        let scores: Vec<f64> = view.column(c).to_vec();
        let pos: Vec<bool> = targets.iter().map(|&t| t == c).collect();
        match average_precision(&scores, &pos)? {
            Some(ap) => per_class.push(ap),
            None => {
                per_class.push(0.0);
                flagged.push(c);
            }
        }
    }
    let map = per_class.iter().sum::<f64>() / per_class.len().max(1) as f64;
    Ok(ApReport {
        map,
        per_class,
        flagged,
    })
}

/// Precision-recall operating points for one class.
pub fn pr_curve(scores: &[f64], positives: &[bool], class: usize) -> Result<PrCurve> {
    check_len(scores.len(), positives.len())?;
    let total_pos = positives.iter().filter(|&&p| p).count();
    if total_pos == 0 {
        return Err(Error::InvalidArgument(format!(
            "class {class} has no positive frames; its PR curve is undefined"
        )));
    }
    let order = ranking(scores);
    let mut curve = PrCurve {
        class,
        thresholds: Vec::new(),
        precision: Vec::new(),
        recall: Vec::new(),
    };
    let (mut tp, mut seen) = (0usize, 0usize);
    for (k, &i) in order.iter().enumerate() {
        tp += positives[i] as usize;
        seen += 1;
        let last_of_group = order.get(k + 1).is_none_or(|&j| scores[j] != scores[i]);
        if last_of_group {
            curve.thresholds.push(scores[i]);
            curve.precision.push(tp as f64 / seen as f64);
            curve.recall.push(tp as f64 / total_pos as f64);
        }
    }
    Ok(curve)
}

/// Curves for every class that has positives.
pub fn pr_curves(posteriors: &Posteriors, targets: &[usize]) -> Result<Vec<PrCurve>> {
    let view = posteriors.view();
    let mut out = Vec::new();
    for c in 0..posteriors.n_classes() {
        let pos: Vec<bool> = targets.iter().map(|&t| t == c).collect();
        if pos.iter().any(|&p| p) {
            out.push(pr_curve(&view.column(c).to_vec(), &pos, c)?);
        }
    }
    Ok(out)
}
