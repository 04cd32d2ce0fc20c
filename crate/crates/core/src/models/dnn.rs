use ndarray::{s, Array2};
use rand::Rng;

use super::params::{uniform_init, ParameterSet};
use super::tape::{Tape, Var};
use super::{insert_norm, Ctx, ModelConfig, Posteriors};
use crate::error::Result;

/// Stack each frame with its `k` neighbours on both sides; frames outside
/// the sequence replicate the nearest edge frame.
pub fn build_context_windows(seq: &Array2<f64>, k: usize) -> Array2<f64> {
    let (t, d) = seq.dim();
    let width = 2 * k + 1;
    let mut out = Array2::zeros((t, width * d));
    for row in 0..t {
        for j in 0..width {
            let src = (row as i64 + j as i64 - k as i64).clamp(0, t as i64 - 1) as usize;
            out.slice_mut(s![row, j * d..(j + 1) * d]).assign(&seq.row(src));
        }
    }
    out
}

pub(crate) fn init(cfg: &ModelConfig, params: &mut ParameterSet, rng: &mut impl Rng) -> usize {
    let h = cfg.hidden_size;
    let mut fan_in = (2 * cfg.context_k + 1) * cfg.input_dim;
    for i in 0..cfg.n_layers {
        params.insert(format!("dnn.layer{i}.W"), uniform_init(h, fan_in, fan_in, rng), true);
        params.insert(format!("dnn.layer{i}.b"), uniform_init(1, h, fan_in, rng), true);
        insert_norm(params, &format!("dnn.layer{i}.norm"), h, cfg.norm_kind);
        fan_in = h;
    }
    h
}

pub(crate) fn body(tape: &mut Tape<'_>, ctx: &mut Ctx<'_, '_>, x: &Array2<f64>) -> Var {
    let mut h = tape.input(build_context_windows(x, ctx.config.context_k));
    for i in 0..ctx.config.n_layers {
        let w = tape.param(&format!("dnn.layer{i}.W"));
        let b = tape.param(&format!("dnn.layer{i}.b"));
        h = tape.linear(h, w, Some(b));
        h = ctx.lrelu(tape, h);
        h = ctx.norm(tape, &format!("dnn.layer{i}.norm"), h);
        if i + 1 < ctx.config.n_layers {
            h = ctx.dropout(tape, h);
        }
    }
    h
}

/// Eval-mode DNN posteriors for a raw `T x D` feature sequence.
pub fn dnn_forward(params: &ParameterSet, seq: &Array2<f64>, config: &ModelConfig) -> Result<Posteriors> {
    super::eval_with(params, config, seq)
}
