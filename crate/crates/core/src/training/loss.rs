use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::tape::{focal_term, Tape, Var};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Class-balance hyperparameter, in `[0, 1)`.
    pub beta: f64,
    /// Focusing parameter, `>= 0`.
    pub gamma: f64,
    /// Training-split frame count per class.
    #[serde(default)]
    pub counts: Vec<u64>,
}

impl LossConfig {
    pub fn new(beta: f64, gamma: f64, counts: Vec<u64>) -> Result<Self> {
        let cfg = Self { beta, gamma, counts };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.beta) {
            return Err(Error::InvalidArgument(format!("beta {} outside [0, 1)", self.beta)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!("gamma {} must be >= 0", self.gamma)));
        }
        Ok(())
    }

    /// `(1 - beta) / (1 - beta^n_y)` per class; `None` where `n_y = 0`.
    pub fn class_weights(&self) -> Vec<Option<f64>> {
        self.counts
            .iter()
            .map(|&n| {
                (n > 0).then(|| {
                    if self.beta == 0.0 {
                        1.0
                    } else {
                        (1.0 - self.beta) / (1.0 - self.beta.powf(n as f64))
                    }
                })
            })
            .collect()
    }

    /// Weights for the given targets, failing on a class with no training frames.
    pub(crate) fn resolved_weights(&self, targets: &[usize]) -> Result<Vec<f64>> {
        let w = self.class_weights();
        for &t in targets {
            match w.get(t) {
                Some(Some(_)) => {}
                _ => return Err(Error::ZeroClassCount { class: t }),
            }
        }
        Ok(w.into_iter().map(|x| x.unwrap_or(0.0)).collect())
    }
}

/// Mean class-balanced focal loss over frames of row-stochastic `probs`.
pub fn cb_focal_loss(probs: ArrayView2<'_, f64>, targets: &[usize], cfg: &LossConfig) -> Result<f64> {
    if probs.nrows() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: probs.nrows(),
            actual: targets.len(),
            context: "posterior frames vs targets",
        });
    }
    if targets.is_empty() {
        return Err(Error::EmptyInput("targets"));
    }
    let w = cfg.resolved_weights(targets)?;
    let sum: f64 = targets
        .iter()
        .enumerate()
        .map(|(i, &y)| focal_term(probs[[i, y]], w[y], cfg.gamma))
        .sum();
    Ok(sum / targets.len() as f64)
}

/// Summed loss node for `logits` on a tape (callers divide by frame count).
pub fn focal_loss_node(tape: &mut Tape<'_>, logits: Var, targets: &[usize], cfg: &LossConfig) -> Result<Var> {
    let w = cfg.resolved_weights(targets)?;
    Ok(tape.focal_loss(logits, targets.to_vec(), w, cfg.gamma))
}
