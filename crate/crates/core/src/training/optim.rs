use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{ParamGrads, ParameterSet};

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

/// AdamW settings. Defaults (`lr` 1e-3, `weight_decay` 1e-2) are
/// conventional starting points, not tuned values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub lr: f64,
    pub weight_decay: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            weight_decay: 1e-2,
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr >= 0.0
            && self.weight_decay >= 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.beta1 > 0.0
            && self.beta2 > 0.0
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid optimizer config {self:?}")))
        }
    }
}

/// First and second moment estimates aligned with a parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Array2<f64>>,
    pub v: Vec<Array2<f64>>,
    pub step: u64,
}

impl AdamState {
    pub fn new(params: &ParameterSet) -> Self {
        let zeros: Vec<Array2<f64>> = params
            .tensors()
            .iter()
            .map(|t| Array2::zeros(t.value.raw_dim()))
            .collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }
}

/// One AdamW update at learning rate `lr`. Weight decay is applied to the
/// parameter directly, separately from the adaptive gradient step. Tensors
/// without a gradient are left untouched.
pub fn adamw_step(
    params: &mut ParameterSet,
    grads: &ParamGrads,
    state: &mut AdamState,
    cfg: &OptimizerConfig,
    lr: f64,
) -> Result<()> {
    for (t, g) in params.tensors().iter().zip(grads) {
        if let Some(g) = g {
            if g.dim() != t.value.dim() {
                return Err(Error::InvalidArgument(format!(
                    "gradient shape mismatch for {}",
                    t.name
                )));
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient(t.name.clone()));
            }
        }
    }
    state.step += 1;
    let k = state.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(k);
    let bc2 = 1.0 - cfg.beta2.powi(k);
    for (i, t) in params.tensors_mut().iter_mut().enumerate() {
        let Some(g) = &grads[i] else { continue };
        if !t.trainable {
            continue;
        }
        if cfg.weight_decay != 0.0 {
            let decay = 1.0 - lr * cfg.weight_decay;
            t.value.mapv_inplace(|v| v * decay);
        }
        let m = &mut state.m[i];
        let v = &mut state.v[i];
        ndarray::Zip::from(&mut t.value)
            .and(m)
            .and(v)
            .and(g)
            .for_each(|p, m, v, &g| {
                *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                let mhat = *m / bc1;
                let vhat = *v / bc2;
                *p -= lr * mhat / (vhat.sqrt() + cfg.eps);
            });
    }
    Ok(())
}

/// Global L2 norm over all gradients.
pub fn grad_norm(grads: &ParamGrads) -> f64 {
    grads
        .iter()
        .flatten()
        .map(|g| g.iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

/// Rescale so the global norm is at most `max_norm`. Returns the norm
/// before clipping.
pub fn clip_grad_norm(grads: &mut ParamGrads, max_norm: f64) -> f64 {
    let norm = grad_norm(grads);
    if norm > max_norm {
        let scale = max_norm / norm;
        for g in grads.iter_mut().flatten() {
            g.mapv_inplace(|v| v * scale);
        }
    }
    norm
}
