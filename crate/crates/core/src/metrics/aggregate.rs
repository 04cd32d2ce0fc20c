use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minutes represented by `frames` frames at `hop_ms`.
pub fn frames_to_minutes(frames: u64, hop_ms: f64) -> f64 {
    frames as f64 * hop_ms / 60_000.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMinutes {
    pub session: String,
    pub predicted_frames: Vec<u64>,
    pub actual_frames: Vec<u64>,
    pub predicted_minutes: Vec<f64>,
    pub actual_minutes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateTimeReport {
    pub hop_ms: f64,
    pub class_names: Vec<String>,
    pub sessions: Vec<SessionMinutes>,
    /// Per activity, over sessions.
    pub rmse_minutes: Vec<f64>,
    /// Uniform mean of `rmse_minutes`.
    pub mean_rmse_minutes: f64,
}

fn histogram(labels: &[usize], n: usize) -> Result<Vec<u64>> {
    let mut counts = vec![0u64; n];
    for &l in labels {
        *counts
            .get_mut(l)
            .ok_or_else(|| Error::InvalidArgument(format!("class index {l} outside {n} classes")))? += 1;
    }
    Ok(counts)
}

/// Time on each activity per session, predicted vs annotated, and the
/// per-activity RMSE over sessions.
pub fn aggregate_time(
    predictions: &BTreeMap<String, Vec<usize>>,
    actual: &BTreeMap<String, Vec<usize>>,
    class_names: &[&str],
    hop_ms: f64,
) -> Result<AggregateTimeReport> {
    let n = class_names.len();
    if predictions.is_empty() {
        return Err(Error::EmptyInput("sessions"));
    }
    let mut sessions = Vec::with_capacity(predictions.len());
    for (id, pred) in predictions {
        let act = actual.get(id).ok_or_else(|| Error::MissingAnnotations(id.clone()))?;
        let pf = histogram(pred, n)?;
        let af = histogram(act, n)?;
        sessions.push(SessionMinutes {
            session: id.clone(),
            predicted_minutes: pf.iter().map(|&f| frames_to_minutes(f, hop_ms)).collect(),
            actual_minutes: af.iter().map(|&f| frames_to_minutes(f, hop_ms)).collect(),
            predicted_frames: pf,
            actual_frames: af,
        });
    }
    let rmse_minutes: Vec<f64> = (0..n)
        .map(|c| {
            let sq: f64 = sessions
                .iter()
                .map(|s| {
                    let d = s.predicted_frames[c] as i64 - s.actual_frames[c] as i64;
                    frames_to_minutes(d.unsigned_abs(), hop_ms).powi(2)
                })
                .sum();
            (sq / sessions.len() as f64).sqrt()
        })
        .collect();
    let mean_rmse_minutes = rmse_minutes.iter().sum::<f64>() / n as f64;
    Ok(AggregateTimeReport {
        hop_ms,
        class_names: class_names.iter().map(|s| s.to_string()).collect(),
        sessions,
        rmse_minutes,
        mean_rmse_minutes,
    })
}

/// Uniform mean over every (activity, test set) RMSE cell.
pub fn headline_rmse(reports: &[&AggregateTimeReport]) -> f64 {
    let cells: Vec<f64> = reports.iter().flat_map(|r| r.rmse_minutes.iter().copied()).collect();
    cells.iter().sum::<f64>() / cells.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(items: &[(&str, Vec<usize>)]) -> BTreeMap<String, Vec<usize>> {
        items.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    #[test]
    fn six_thousand_frames_is_one_minute() {
        let p = map(&[("s1", vec![1; 6000])]);
        let r = aggregate_time(&p, &p, &["sgl", "grp", "sil", "oth"], 10.0).unwrap();
        assert_eq!(r.sessions[0].predicted_minutes[1], 1.0);
        assert!(r.rmse_minutes.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn plus_minus_one_minute_gives_rmse_one() {
        let pred = map(&[("a", vec![0; 12000]), ("b", vec![0; 6000])]);
        let act = map(&[("a", vec![0; 6000]), ("b", vec![0; 12000])]);
        let r = aggregate_time(&pred, &act, &["x", "y"], 10.0).unwrap();
        assert_eq!(r.rmse_minutes, vec![1.0, 0.0]);
        assert_eq!(r.mean_rmse_minutes, 0.5);
        assert_eq!(headline_rmse(&[&r, &r]), 0.5);
    }

    #[test]
    fn missing_annotations_error() {
        let pred = map(&[("a", vec![0; 3])]);
        let act = map(&[("b", vec![0; 3])]);
        assert!(matches!(
            aggregate_time(&pred, &act, &["x"], 10.0),
            Err(Error::MissingAnnotations(_))
        ));
    }
}
