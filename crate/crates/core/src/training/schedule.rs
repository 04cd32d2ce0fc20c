use serde::{Deserialize, Serialize};

/// Hard cap on training length.
pub const MAX_EPOCHS: usize = 35;
pub const DEFAULT_PATIENCE: usize = 9;
pub const DEFAULT_LR_HALVE_WINDOW: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRules {
    pub max_epochs: usize,
    pub patience: usize,
    pub lr_halve_window: usize,
}

impl Default for ScheduleRules {
    fn default() -> Self {
        Self {
            max_epochs: MAX_EPOCHS,
            patience: DEFAULT_PATIENCE,
            lr_halve_window: DEFAULT_LR_HALVE_WINDOW,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    /// Completed epochs.
    pub epoch: usize,
    pub lr: f64,
    /// Epochs since the last dev improvement.
    pub stale: usize,
    /// Stale epochs since the last learning-rate change.
    pub since_halving: usize,
    pub best: Option<f64>,
    pub accumulation: usize,
    pub seed: u64,
}

impl TrainState {
    pub fn new(lr: f64, accumulation: usize, seed: u64) -> Self {
        Self {
            epoch: 0,
            lr,
            stale: 0,
            since_halving: 0,
            best: None,
            accumulation,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduleOutcome {
    pub improved: bool,
    pub halved: bool,
    pub stop: bool,
}

/// Close an epoch with its dev error. Only a strictly lower error counts as
/// improvement.
pub fn schedule_update(state: &mut TrainState, dev_error: f64, rules: &ScheduleRules) -> ScheduleOutcome {
    state.epoch += 1;
    let improved = state.best.is_none_or(|b| dev_error < b);
    let mut halved = false;
    if improved {
        state.best = Some(dev_error);
        state.stale = 0;
        state.since_halving = 0;
    } else {
        state.stale += 1;
        state.since_halving += 1;
        if state.since_halving >= rules.lr_halve_window {
            state.lr *= 0.5;
            state.since_halving = 0;
            halved = true;
        }
    }
    let stop = state.stale >= rules.patience || state.epoch >= rules.max_epochs.min(MAX_EPOCHS);
    ScheduleOutcome { improved, halved, stop }
}
