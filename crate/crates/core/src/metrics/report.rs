use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ap::{mean_average_precision, pr_curves, PrCurve};
use super::classification::{check_len, confusion_matrix, hard_accuracy, weighted_f1, ConfusionMatrix};
use crate::error::{Error, Result};
use crate::labels::LabelScheme;
use crate::models::Posteriors;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub test_set: String,
    pub scheme: LabelScheme,
    pub frames: usize,
    pub map: f64,
    pub per_class_ap: Vec<f64>,
    pub flagged_classes: Vec<usize>,
    pub weighted_f1: f64,
    pub accuracy: f64,
    pub error_rate: f64,
    pub confusion: ConfusionMatrix,
    pub pr_curves: Vec<PrCurve>,
}

/// Score posteriors against frame targets, pooling all frames of the given
/// sessions.
pub fn evaluate(
    model: &str,
    test_set: &str,
    scheme: LabelScheme,
    sessions: &[(&Posteriors, &[usize])],
) -> Result<EvalReport> {
    let c = scheme.arity();
    let mut probs = Vec::new();
    let mut targets = Vec::new();
    let mut frames = 0;
    for (p, t) in sessions {
        check_len(p.frames(), t.len())?;
        if p.n_classes() != c {
            return Err(Error::DimensionMismatch {
                expected: c,
                actual: p.n_classes(),
                context: "posterior classes vs label scheme",
            });
        }
        probs.extend(p.view().iter().copied());
        targets.extend_from_slice(t);
        frames += t.len();
    }
    if frames == 0 {
        return Err(Error::EmptyInput("evaluation frames"));
    }
    let pooled = Posteriors::new(ndarray::Array2::from_shape_vec((frames, c), probs).expect("shape"))?;
    let pred = pooled.argmax();
    let acc = hard_accuracy(&pred, &targets)?;
    let ap = mean_average_precision(&pooled, &targets)?;
    Ok(EvalReport {
        model: model.to_string(),
        test_set: test_set.to_string(),
        scheme,
        frames,
        map: ap.map,
        per_class_ap: ap.per_class,
        flagged_classes: ap.flagged,
        weighted_f1: weighted_f1(&pred, &targets, c)?,
        accuracy: acc.accuracy,
        error_rate: acc.error_rate,
        confusion: confusion_matrix(&pred, &targets, c)?,
        pr_curves: pr_curves(&pooled, &targets)?,
    })
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Rows are targets, columns predictions.
pub fn write_confusion_csv(path: impl AsRef<Path>, cm: &ConfusionMatrix, scheme: LabelScheme) -> Result<()> {
    let mut w = csv_writer(path.as_ref())?;
    let names = scheme.class_names();
    let mut header = vec!["target"];
    header.extend_from_slice(names);
    w.write_record(&header)?;
    for (i, row) in cm.counts.rows().into_iter().enumerate() {
        let mut rec = vec![names[i].to_string()];
        rec.extend(row.iter().map(|c| c.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path.as_ref(), e))
}

pub fn write_pr_csv(path: impl AsRef<Path>, curves: &[PrCurve], scheme: LabelScheme) -> Result<()> {
    let mut w = csv_writer(path.as_ref())?;
    w.write_record(["class", "threshold", "precision", "recall"])?;
    for c in curves {
        for i in 0..c.thresholds.len() {
            w.write_record([
                scheme.class_name(c.class).to_string(),
                c.thresholds[i].to_string(),
                c.precision[i].to_string(),
                c.recall[i].to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path.as_ref(), e))
}

/// One row per frame. `actual` may be absent, leaving that column empty.
pub fn write_trace_csv(
    path: impl AsRef<Path>,
    predicted: &[usize],
    actual: Option<&[usize]>,
    hop_ms: f64,
    scheme: LabelScheme,
) -> Result<()> {
    if let Some(a) = actual {
        check_len(predicted.len(), a.len())?;
    }
    let mut w = csv_writer(path.as_ref())?;
    w.write_record(["frame_idx", "time_s", "predicted", "actual"])?;
    for (i, &p) in predicted.iter().enumerate() {
        let time = format!("{:.2}", i as f64 * hop_ms / 1000.0);
        let act = actual.map(|a| scheme.class_name(a[i])).unwrap_or("");
        w.write_record([i.to_string().as_str(), &time, scheme.class_name(p), act])?;
    }
    w.flush().map_err(|e| Error::io(path.as_ref(), e))
}

/// Read predicted and (if present) actual class indices from a trace CSV.
pub fn read_trace_csv(path: impl AsRef<Path>, scheme: LabelScheme) -> Result<(Vec<usize>, Option<Vec<usize>>)> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::corrupt(path, e.to_string()))?;
    let names = scheme.class_names();
    let lookup = |s: &str| {
        names
            .iter()
            .position(|n| *n == s)
            .ok_or_else(|| Error::UnknownLabel(s.to_string()))
    };
    let mut pred = Vec::new();
    let mut act = Vec::new();
    let mut has_actual = true;
    for rec in r.records() {
        let rec = rec?;
        pred.push(lookup(rec.get(2).unwrap_or(""))?);
        match rec.get(3) {
            Some(a) if !a.is_empty() => act.push(lookup(a)?),
            _ => has_actual = false,
        }
    }
    Ok((pred, has_actual.then_some(act)))
}
