use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::data::{chunk_sessions, epoch_batches, stream_key, Chunk, SessionData};
use super::loss::{focal_loss_node, LossConfig};
use super::optim::{adamw_step, clip_grad_norm, AdamState, OptimizerConfig};
use super::schedule::{schedule_update, TrainState};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::metrics::hard_accuracy;
use crate::models::{BatchStat, Mode, Model, ParamGrads, Tape};

/// Gradient clipping threshold on the global L2 norm.
pub const MAX_GRAD_NORM: f64 = 1.0;

/// Summed (not yet normalized) gradients of one or more micro-batches.
#[derive(Debug, Clone)]
pub struct GradSum {
    pub grads: ParamGrads,
    pub loss_sum: f64,
    pub frames: usize,
    pub batch_stats: Vec<BatchStat>,
}

impl GradSum {
    pub fn empty(n_tensors: usize) -> Self {
        Self {
            grads: vec![None; n_tensors],
            loss_sum: 0.0,
            frames: 0,
            batch_stats: Vec::new(),
        }
    }

    pub fn merge(&mut self, other: GradSum) {
        for (a, b) in self.grads.iter_mut().zip(other.grads) {
            match (a.as_mut(), b) {
                (Some(a), Some(b)) => *a += &b,
                (None, Some(b)) => *a = Some(b),
                _ => {}
            }
        }
        self.loss_sum += other.loss_sum;
        self.frames += other.frames;
        self.batch_stats.extend(other.batch_stats);
    }
}

/// Per-sequence gradients of the summed loss, in parallel, reduced in
/// sequence order. Each entry pairs a chunk with the key of its dropout
/// stream.
pub fn accumulate_gradients(
    model: &Model,
    batch: &[(u64, &Chunk)],
    loss: &LossConfig,
    exec: Execution,
) -> Result<GradSum> {
    let parts = exec.try_map(batch.len(), |i| {
        let (key, chunk) = batch[i];
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        let mut tape = Tape::new(model.params());
        let (logits, stats) = model.forward(&mut tape, &chunk.features, Mode::Train(&mut rng))?;
        let l = focal_loss_node(&mut tape, logits, &chunk.labels, loss)?;
        let loss_sum = tape.value(l)[[0, 0]];
        Ok::<_, Error>(GradSum {
            grads: tape.backward(l),
            loss_sum,
            frames: chunk.labels.len(),
            batch_stats: stats,
        })
    })?;
    let mut total = GradSum::empty(model.params().len());
    for p in parts {
        total.merge(p);
    }
    Ok(total)
}

/// Normalize by frame count, clip, take one AdamW step and refresh
/// batch-norm running statistics. Returns the pre-clip gradient norm.
pub fn apply_gradients(
    model: &mut Model,
    adam: &mut AdamState,
    mut sum: GradSum,
    optim: &OptimizerConfig,
    lr: f64,
) -> Result<f64> {
    if sum.frames == 0 {
        return Err(Error::EmptyInput("minibatch"));
    }
    let inv = 1.0 / sum.frames as f64;
    for g in sum.grads.iter_mut().flatten() {
        g.mapv_inplace(|v| v * inv);
    }
    let norm = clip_grad_norm(&mut sum.grads, MAX_GRAD_NORM);
    adamw_step(model.params_mut(), &sum.grads, adam, optim, lr)?;
    model.update_running_stats(&sum.batch_stats)?;
    Ok(norm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Frame-mean training loss over the epoch.
    pub train_loss: f64,
    pub dev_error: f64,
    /// Learning rate used during the epoch.
    pub lr: f64,
    pub wall_s: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest dev error.
    pub model: Model,
    pub best_epoch: usize,
    pub best_dev_error: f64,
    pub log: Vec<EpochLog>,
    /// Loss settings with the training-split class counts filled in.
    pub loss: LossConfig,
    pub config: TrainConfig,
}

/// Per-class frame counts over sessions.
pub fn count_classes(sessions: &[SessionData], n_classes: usize) -> Result<Vec<u64>> {
    let mut counts = vec![0u64; n_classes];
    for s in sessions {
        for &l in &s.labels {
            *counts
                .get_mut(l)
                .ok_or_else(|| Error::InvalidArgument(format!("label {l} outside {n_classes} classes")))? += 1;
        }
    }
    Ok(counts)
}

/// Pooled argmax frame error over sessions, evaluated in chunks.
pub fn dev_error(model: &Model, sessions: &[SessionData], chunk_len: usize, exec: Execution) -> Result<f64> {
    let mut pred = Vec::new();
    let mut targets = Vec::new();
    for s in sessions {
        pred.extend(model.posteriors_chunked(&s.features, chunk_len, exec)?.argmax());
        targets.extend_from_slice(&s.labels);
    }
    Ok(hard_accuracy(&pred, &targets)?.error_rate)
}

/// Run the full training loop and keep the best-dev parameters.
pub fn train_model(
    config: &TrainConfig,
    train: &[SessionData],
    dev: &[SessionData],
    exec: Execution,
) -> Result<TrainOutcome> {
    let first = train.first().ok_or(Error::EmptyInput("training sessions"))?;
    if dev.is_empty() {
        return Err(Error::EmptyInput("dev sessions"));
    }
    let mut cfg = config.clone();
    cfg.resolve(first.features.ncols());
    cfg.validate()?;
    let mut loss = cfg.loss.clone();
    loss.counts = count_classes(train, cfg.model.n_classes)?;

    let mut model = Model::new(cfg.model.clone(), cfg.seed)?;
    let mut adam = AdamState::new(model.params());
    let chunks = chunk_sessions(train, cfg.chunk_len())?;
    let batch_size = cfg.batch_size.min(chunks.len());
    let mut state = TrainState::new(cfg.optim.lr, cfg.accumulation, cfg.seed);
    let rules = cfg.rules();
    let mut best = model.clone();
    let mut best_epoch = 0;
    let mut log = Vec::new();

    loop {
        let started = Instant::now();
        let epoch = state.epoch + 1;
        let lr = state.lr;
        let (mut loss_sum, mut frames) = (0.0, 0usize);
        for (step, batch) in epoch_batches(chunks.len(), batch_size, cfg.seed, epoch)?
            .iter()
            .enumerate()
        {
            let keyed: Vec<(u64, &Chunk)> = batch
                .iter()
                .map(|&i| (stream_key(cfg.seed, epoch as u64, i as u64), &chunks[i]))
                .collect();
            let micro = keyed.len().div_ceil(cfg.accumulation);
            let mut sum = GradSum::empty(model.params().len());
            for mb in keyed.chunks(micro) {
                sum.merge(accumulate_gradients(&model, mb, &loss, exec)?);
            }
            if !sum.loss_sum.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, step });
            }
            loss_sum += sum.loss_sum;
            frames += sum.frames;
            apply_gradients(&mut model, &mut adam, sum, &cfg.optim, lr)?;
        }
        let dev_err = dev_error(&model, dev, cfg.chunk_len(), exec)?;
        let outcome = schedule_update(&mut state, dev_err, &rules);
        if outcome.improved {
            best = model.clone();
            best_epoch = epoch;
        }
        log.push(EpochLog {
            epoch,
            train_loss: loss_sum / frames as f64,
            dev_error: dev_err,
            lr,
            wall_s: started.elapsed().as_secs_f64(),
        });
        if outcome.stop {
            break;
        }
    }
    Ok(TrainOutcome {
        model: best,
        best_epoch,
        best_dev_error: state.best.unwrap_or(1.0),
        log,
        loss,
        config: cfg,
    })
}

/// Per-epoch CSV. Wall-clock time is written only when `timing` is set, so
/// logs of identical runs are byte-identical by default.
pub fn write_training_log(path: impl AsRef<Path>, log: &[EpochLog], timing: bool) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("epoch,train_loss,dev_error,lr,wall_s\n");
    for e in log {
        let wall = if timing { format!("{:.3}", e.wall_s) } else { "0".into() };
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            e.epoch, e.train_loss, e.dev_error, e.lr, wall
        ));
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub index: usize,
    pub config_digest: String,
    pub best_epoch: usize,
    pub best_dev_error: f64,
}

/// Train each configuration and keep the one with the lowest dev error
/// (earliest wins ties).
pub fn sweep(
    configs: &[TrainConfig],
    train: &[SessionData],
    dev: &[SessionData],
    exec: Execution,
) -> Result<(Vec<SweepEntry>, TrainOutcome)> {
    let mut entries = Vec::new();
    let mut best: Option<TrainOutcome> = None;
    for (index, cfg) in configs.iter().enumerate() {
        let out = train_model(cfg, train, dev, exec)?;
        entries.push(SweepEntry {
            index,
            config_digest: out.config.digest(),
            best_epoch: out.best_epoch,
            best_dev_error: out.best_dev_error,
        });
        if best.as_ref().is_none_or(|b| out.best_dev_error < b.best_dev_error) {
            best = Some(out);
        }
    }
    let best = best.ok_or(Error::EmptyInput("sweep configurations"))?;
    Ok((entries, best))
}
