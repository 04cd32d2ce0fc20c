use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::features::{
    extract_stream, fit_stats, fuse_streams, read_wav, standardize, write_feature_file, FeatureStream, FrameSpec,
    Split, StandardizationStats, Waveform,
};
use crate::labels::{intervals_to_frame_labels, read_annotations, AnnotationInterval, LabelScheme};
use crate::metrics::write_trace_csv;
use crate::models::Posteriors;
use crate::training::SessionData;

use super::checkpoint::Checkpoint;
use super::split::{resolve, SessionRecord};

pub const DEFAULT_RECIPE: [&str; 2] = ["mel", "prosody"];

pub fn default_recipe() -> Vec<String> {
    DEFAULT_RECIPE.iter().map(|s| s.to_string()).collect()
}

/// Unstandardized fused features for one waveform.
pub fn recipe_features(wave: &Waveform, recipe: &[String], exec: Execution) -> Result<FeatureStream> {
    if recipe.is_empty() {
        return Err(Error::EmptyInput("feature recipe"));
    }
    let streams = recipe
        .iter()
        .map(|name| extract_stream(wave, name, exec))
        .collect::<Result<Vec<_>>>()?;
    fuse_streams(&streams)
}

/// Features and annotations of one session, before standardization.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSession {
    pub id: String,
    pub instructor: usize,
    pub features: FeatureStream,
    pub intervals: Vec<AnnotationInterval>,
}

/// Read and featurize every listed session, in parallel across files.
pub fn load_sessions(
    records: &[SessionRecord],
    base: &Path,
    recipe: &[String],
    exec: Execution,
) -> Result<Vec<RawSession>> {
    exec.try_map(records.len(), |i| {
        let r = &records[i];
        let wave = read_wav(resolve(base, &r.wav))?;
        Ok(RawSession {
            id: r.session.clone(),
            instructor: r.instructor,
            features: recipe_features(&wave, recipe, Execution::Sequential)?,
            intervals: read_annotations(resolve(base, &r.annotations))?,
        })
    })
}

/// Fit standardization statistics on training sessions only.
pub fn fit_train_stats(train: &[RawSession]) -> Result<StandardizationStats> {
    let streams: Vec<&FeatureStream> = train.iter().map(|s| &s.features).collect();
    fit_stats(&streams, Split::Train)
}

/// Standardize and attach per-frame labels under `scheme`.
pub fn prepare_sessions(
    raw: &[RawSession],
    stats: &StandardizationStats,
    scheme: LabelScheme,
) -> Result<Vec<SessionData>> {
    raw.iter()
        .map(|s| {
            let x = standardize(&s.features, stats)?;
            let labels = intervals_to_frame_labels(&s.intervals, x.frames(), x.spec.hop_ms, scheme, false)?;
            SessionData::new(s.id.clone(), x.data, labels.labels)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub posteriors: Posteriors,
    pub predicted: Vec<usize>,
    pub hop_ms: f64,
}

impl Prediction {
    pub fn posteriors_stream(&self) -> FeatureStream {
        let spec = FrameSpec {
            window_ms: self.hop_ms,
            hop_ms: self.hop_ms,
        };
        FeatureStream::new("posteriors", spec, self.posteriors.view().to_owned())
    }
}

/// Run a checkpoint over one waveform. The recipe must equal the one the
/// checkpoint was trained with.
pub fn predict_waveform(ckpt: &Checkpoint, wave: &Waveform, recipe: &[String], exec: Execution) -> Result<Prediction> {
    if recipe != ckpt.recipe.as_slice() {
        return Err(Error::RecipeMismatch {
            expected: ckpt.recipe.clone(),
            actual: recipe.to_vec(),
        });
    }
    let raw = recipe_features(wave, recipe, exec)?;
    let x = standardize(&raw, &ckpt.stats)?;
    let cfg = ckpt.model.config();
    let posteriors = ckpt
        .model
        .posteriors_chunked(&x.data, cfg.arch.default_chunk_len(), exec)?;
    Ok(Prediction {
        predicted: posteriors.argmax(),
        posteriors,
        hop_ms: x.spec.hop_ms,
    })
}

pub fn predict(ckpt: &Checkpoint, wav: impl AsRef<Path>, recipe: &[String], exec: Execution) -> Result<Prediction> {
    predict_waveform(ckpt, &read_wav(wav)?, recipe, exec)
}

/// Write `<stem>.trace.csv` and `<stem>.posteriors.feat` into `dir`.
pub fn write_prediction(dir: &Path, stem: &str, pred: &Prediction, scheme: LabelScheme) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let trace = dir.join(format!("{stem}.trace.csv"));
    let post = dir.join(format!("{stem}.posteriors.feat"));
    write_trace_csv(&trace, &pred.predicted, None, pred.hop_ms, scheme)?;
    write_feature_file(&post, &pred.posteriors_stream())?;
    Ok((trace, post))
}
