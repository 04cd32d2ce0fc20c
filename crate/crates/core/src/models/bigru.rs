use ndarray::Array2;
use rand::Rng;

use super::gru::{init_stack, stack};
use super::params::{uniform_init, ParameterSet};
use super::tape::{Tape, Var};
use super::{Ctx, ModelConfig, Posteriors};
use crate::error::Result;

pub(crate) fn init(cfg: &ModelConfig, params: &mut ParameterSet, rng: &mut impl Rng) -> usize {
    let h = cfg.hidden_size;
    init_stack("bigru.fwd", cfg, params, rng);
    init_stack("bigru.bwd", cfg, params, rng);
    params.insert("bigru.W_f", uniform_init(h, h, 2 * h, rng), true);
    params.insert("bigru.W_b", uniform_init(h, h, 2 * h, rng), true);
    params.insert("bigru.b", uniform_init(1, h, 2 * h, rng), true);
    h
}

/// Forward and backward stacks run independently; their top states are
/// combined as `W_f h_fwd + W_b h_bwd + b`.
pub(crate) fn body(tape: &mut Tape<'_>, ctx: &mut Ctx<'_, '_>, x: &Array2<f64>) -> Var {
    let x = tape.input(x.clone());
    let hf = stack(tape, ctx, "bigru.fwd", x, false);
    let hb = stack(tape, ctx, "bigru.bwd", x, true);
    let (wf, wb, b) = (tape.param("bigru.W_f"), tape.param("bigru.W_b"), tape.param("bigru.b"));
    let f = tape.linear(hf, wf, None);
    let g = tape.linear(hb, wb, Some(b));
    tape.add(f, g)
}

/// Eval-mode bidirectional GRU posteriors.
pub fn bigru_forward(params: &ParameterSet, seq: &Array2<f64>, config: &ModelConfig) -> Result<Posteriors> {
    super::eval_with(params, config, seq)
}
