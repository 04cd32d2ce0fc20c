use ndarray::Array2;
use rand::Rng;

use super::params::{uniform_init, ParameterSet};
use super::tape::{Tape, Var};
use super::{insert_norm, Ctx, ModelConfig, Posteriors};
use crate::error::Result;

/// Integer dilation per layer: `max(1, round(b^(l-1)))` for `l = 1..=n_layers`.
pub fn dilation_schedule(base: f64, n_layers: usize) -> Vec<usize> {
    (0..n_layers)
        .map(|l| (base.powi(l as i32).round() as usize).max(1))
        .collect()
}

/// Symmetric span of input frames that can affect one output frame.
pub fn receptive_field(kernel: usize, dilations: &[usize]) -> usize {
    1 + (kernel - 1) * dilations.iter().sum::<usize>()
}

pub(crate) fn init(cfg: &ModelConfig, params: &mut ParameterSet, rng: &mut impl Rng) -> usize {
    let h = cfg.hidden_size;
    insert_norm(params, "dtcnn.input_norm", cfg.input_dim, cfg.norm_kind);
    let mut cin = cfg.input_dim;
    for i in 0..cfg.n_layers {
        let fan_in = cfg.kernel_size * cin;
        params.insert(format!("dtcnn.layer{i}.W"), uniform_init(h, fan_in, fan_in, rng), true);
        params.insert(format!("dtcnn.layer{i}.b"), uniform_init(1, h, fan_in, rng), true);
        insert_norm(params, &format!("dtcnn.layer{i}.norm"), h, cfg.norm_kind);
        cin = h;
    }
    h
}

pub(crate) fn body(tape: &mut Tape<'_>, ctx: &mut Ctx<'_, '_>, x: &Array2<f64>) -> Var {
    let cfg = ctx.config;
    let dilations = dilation_schedule(cfg.dilation_base, cfg.n_layers);
    let mut h = tape.input(x.clone());
    h = ctx.norm(tape, "dtcnn.input_norm", h);
    h = ctx.dropout(tape, h);
    for (i, &d) in dilations.iter().enumerate() {
        let w = tape.param(&format!("dtcnn.layer{i}.W"));
        let b = tape.param(&format!("dtcnn.layer{i}.b"));
        h = tape.conv1d(h, w, b, cfg.kernel_size, d);
        h = ctx.lrelu(tape, h);
        h = ctx.norm(tape, &format!("dtcnn.layer{i}.norm"), h);
    }
    h
}

/// Eval-mode DTCNN posteriors.
pub fn dtcnn_forward(params: &ParameterSet, seq: &Array2<f64>, config: &ModelConfig) -> Result<Posteriors> {
    super::eval_with(params, config, seq)
}
