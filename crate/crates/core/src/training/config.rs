use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::loss::LossConfig;
use super::optim::OptimizerConfig;
use super::schedule::{ScheduleRules, DEFAULT_LR_HALVE_WINDOW, DEFAULT_PATIENCE, MAX_EPOCHS};
use crate::error::{Error, Result};
use crate::labels::LabelScheme;
use crate::models::{Arch, ModelConfig};

fn default_features() -> Vec<String> {
    vec!["mel".into(), "prosody".into()]
}
fn default_batch() -> usize {
    8
}
fn default_max_epochs() -> usize {
    MAX_EPOCHS
}
fn default_patience() -> usize {
    DEFAULT_PATIENCE
}
fn default_halve() -> usize {
    DEFAULT_LR_HALVE_WINDOW
}
fn default_accumulation() -> usize {
    1
}
fn default_loss() -> LossConfig {
    LossConfig {
        beta: 0.999,
        gamma: 2.0,
        counts: Vec::new(),
    }
}

/// Everything needed to reproduce a training run.
///
/// Defaults for loss (`beta` 0.999, `gamma` 2), optimizer and batch size (8)
/// are conventional starting points rather than tuned values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub arch: Arch,
    pub scheme: LabelScheme,
    #[serde(default = "default_features")]
    pub features: Vec<String>,
    pub model: ModelConfig,
    #[serde(default = "default_loss")]
    pub loss: LossConfig,
    #[serde(default)]
    pub optim: OptimizerConfig,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    /// Defaults to 3000 frames for recurrent models, 12000 otherwise.
    #[serde(default)]
    pub chunk_len: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
    #[serde(default = "default_halve")]
    pub lr_halve_window: usize,
    /// Micro-batches per optimizer step.
    #[serde(default = "default_accumulation")]
    pub accumulation: usize,
}

impl TrainConfig {
    pub fn new(model: ModelConfig, scheme: LabelScheme) -> Self {
        Self {
            arch: model.arch,
            scheme,
            features: default_features(),
            model,
            loss: default_loss(),
            optim: OptimizerConfig::default(),
            batch_size: default_batch(),
            chunk_len: None,
            seed: 0,
            max_epochs: MAX_EPOCHS,
            patience: DEFAULT_PATIENCE,
            lr_halve_window: DEFAULT_LR_HALVE_WINDOW,
            accumulation: 1,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn chunk_len(&self) -> usize {
        self.chunk_len.unwrap_or_else(|| self.arch.default_chunk_len())
    }

    pub fn rules(&self) -> ScheduleRules {
        ScheduleRules {
            max_epochs: self.max_epochs,
            patience: self.patience,
            lr_halve_window: self.lr_halve_window,
        }
    }

    /// Fill data-dependent model fields left at 0.
    pub fn resolve(&mut self, input_dim: usize) {
        if self.model.input_dim == 0 {
            self.model.input_dim = input_dim;
        }
        if self.model.n_classes == 0 {
            self.model.n_classes = self.scheme.arity();
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(format!("train config: {m}")));
        if self.arch != self.model.arch {
            return bad(format!(
                "arch {:?} disagrees with model.arch {:?}",
                self.arch, self.model.arch
            ));
        }
        if self.model.n_classes != self.scheme.arity() {
            return bad(format!(
                "model has {} classes, scheme has {}",
                self.model.n_classes,
                self.scheme.arity()
            ));
        }
        if self.features.is_empty() {
            return bad("no feature streams".into());
        }
        if self.batch_size == 0 || self.accumulation == 0 || self.chunk_len() == 0 {
            return bad("batch_size, accumulation and chunk_len must be positive".into());
        }
        if self.max_epochs == 0 || self.max_epochs > MAX_EPOCHS {
            return bad(format!("max_epochs must lie in [1, {MAX_EPOCHS}]"));
        }
        if self.patience == 0 || self.lr_halve_window == 0 {
            return bad("patience and lr_halve_window must be positive".into());
        }
        self.model.validate()?;
        self.loss.validate()?;
        self.optim.validate()
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        let hash = Sha256::digest(&bytes);
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}
