use ndarray::Array2;
use rand::Rng;

use super::params::{uniform_init, ParameterSet};
use super::tape::{softmax_rows, Tape, Var};
use super::{Ctx, Posteriors};

pub(crate) fn init(hidden: usize, classes: usize, params: &mut ParameterSet, rng: &mut impl Rng) {
    params.insert("head.W1", uniform_init(hidden, hidden, hidden, rng), true);
    params.insert("head.b1", uniform_init(1, hidden, hidden, rng), true);
    params.insert("head.W2", uniform_init(classes, hidden, hidden, rng), true);
    params.insert("head.b2", uniform_init(1, classes, hidden, rng), true);
}

pub(crate) fn logits(tape: &mut Tape<'_>, ctx: &Ctx<'_, '_>, h: Var) -> Var {
    let (w1, b1) = (tape.param("head.W1"), tape.param("head.b1"));
    let (w2, b2) = (tape.param("head.W2"), tape.param("head.b2"));
    let z = tape.linear(h, w1, Some(b1));
    let z = ctx.lrelu(tape, z);
    tape.linear(z, w2, Some(b2))
}

/// Framewise two-layer MLP with softmax output applied to hidden states `h`.
pub fn classifier_head(params: &ParameterSet, h: &Array2<f64>, leaky_slope: f64) -> Posteriors {
    let mut tape = Tape::new(params);
    let x = tape.input(h.clone());
    let (w1, b1) = (tape.param("head.W1"), tape.param("head.b1"));
    let (w2, b2) = (tape.param("head.W2"), tape.param("head.b2"));
    let z = tape.linear(x, w1, Some(b1));
    let z = tape.leaky_relu(z, leaky_slope);
    let z = tape.linear(z, w2, Some(b2));
    Posteriors::from_softmax(softmax_rows(tape.value(z)))
}
