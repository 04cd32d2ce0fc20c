use ndarray::Array2;
use rand::Rng;

use super::params::{uniform_init, ParameterSet};
use super::tape::{Tape, Var};
use super::{Ctx, ModelConfig, Posteriors};
use crate::error::Result;

pub(crate) const GATE_TENSORS: [&str; 10] = [
    "W_ir", "W_iz", "W_in", "W_hr", "W_hz", "W_hn", "b_r", "b_z", "b_in", "b_hn",
];

pub(crate) fn init_stack(prefix: &str, cfg: &ModelConfig, params: &mut ParameterSet, rng: &mut impl Rng) {
    let h = cfg.hidden_size;
    let mut din = cfg.input_dim;
    for l in 0..cfg.n_layers {
        for name in GATE_TENSORS {
            let (rows, cols, fan) = match name {
                "W_ir" | "W_iz" | "W_in" => (h, din, din),
                "W_hr" | "W_hz" | "W_hn" => (h, h, h),
                _ => (1, h, h),
            };
            params.insert(
                format!("{prefix}.layer{l}.{name}"),
                uniform_init(rows, cols, fan, rng),
                true,
            );
        }
        din = h;
    }
}

pub(crate) fn init(cfg: &ModelConfig, params: &mut ParameterSet, rng: &mut impl Rng) -> usize {
    init_stack("gru", cfg, params, rng);
    cfg.hidden_size
}

/// One GRU layer over a whole sequence.
pub(crate) fn layer(tape: &mut Tape<'_>, prefix: &str, x: Var, reverse: bool) -> Var {
    let p = |tape: &mut Tape<'_>, n: &str| tape.param(&format!("{prefix}.{n}"));
    let (wir, wiz, win) = (p(tape, "W_ir"), p(tape, "W_iz"), p(tape, "W_in"));
    let (whr, whz, whn) = (p(tape, "W_hr"), p(tape, "W_hz"), p(tape, "W_hn"));
    let (br, bz, bin, bhn) = (p(tape, "b_r"), p(tape, "b_z"), p(tape, "b_in"), p(tape, "b_hn"));
    let ar = tape.linear(x, wir, Some(br));
    let az = tape.linear(x, wiz, Some(bz));
    let an = tape.linear(x, win, Some(bin));
    tape.gru(ar, az, an, whr, whz, whn, bhn, reverse)
}

/// Input dropout, then layers separated by dropout.
pub(crate) fn stack(tape: &mut Tape<'_>, ctx: &mut Ctx<'_, '_>, prefix: &str, x: Var, reverse: bool) -> Var {
    let mut h = ctx.dropout(tape, x);
    for l in 0..ctx.config.n_layers {
        if l > 0 {
            h = ctx.dropout(tape, h);
        }
        h = layer(tape, &format!("{prefix}.layer{l}"), h, reverse);
    }
    h
}

pub(crate) fn body(tape: &mut Tape<'_>, ctx: &mut Ctx<'_, '_>, x: &Array2<f64>) -> Var {
    let x = tape.input(x.clone());
    stack(tape, ctx, "gru", x, false)
}

/// Eval-mode unidirectional GRU posteriors.
pub fn gru_forward(params: &ParameterSet, seq: &Array2<f64>, config: &ModelConfig) -> Result<Posteriors> {
    super::eval_with(params, config, seq)
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::super::testutil::*;
    use super::super::{Arch, Model};
    use super::*;

    fn sig(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    /// Step-by-step scalar evaluation of one GRU layer.
    pub(crate) fn scalar_gru(p: &ParameterSet, prefix: &str, x: &[Vec<f64>], h: usize, reverse: bool) -> Vec<Vec<f64>> {
        let g = |n: &str| p.get(&format!("{prefix}.{n}")).unwrap().clone();
        let (wir, wiz, win, whr, whz, whn) = (g("W_ir"), g("W_iz"), g("W_in"), g("W_hr"), g("W_hz"), g("W_hn"));
        let (br, bz, bin, bhn) = (g("b_r"), g("b_z"), g("b_in"), g("b_hn"));
        let t_len = x.len();
        let mut out = vec![vec![0.0; h]; t_len];
        let mut prev = vec![0.0; h];
        let order: Vec<usize> = if reverse {
            (0..t_len).rev().collect()
        } else {
            (0..t_len).collect()
        };
        for t in order {
            let mut next = vec![0.0; h];
            for i in 0..h {
                let dot = |w: &Array2<f64>, v: &[f64]| (0..v.len()).map(|j| w[[i, j]] * v[j]).sum::<f64>();
                let r = sig(dot(&wir, &x[t]) + br[[0, i]] + dot(&whr, &prev));
                let z = sig(dot(&wiz, &x[t]) + bz[[0, i]] + dot(&whz, &prev));
                let n = (dot(&win, &x[t]) + bin[[0, i]] + r * (dot(&whn, &prev) + bhn[[0, i]])).tanh();
                next[i] = (1.0 - z) * n + z * prev[i];
            }
            out[t] = next.clone();
            prev = next;
        }
        out
    }

    fn tiny() -> (Model, Array2<f64>) {
        let cfg = ModelConfig::new(Arch::Gru, 2, 2, 1, 4);
        let mut m = Model::new(cfg, 0).unwrap();
        randomize(&mut m, 0.9, 21);
        (m, input(3, 2, 8))
    }

    #[test]
    fn layer_matches_scalar_oracle() {
        let (m, x) = tiny();
        let mut tape = Tape::new(m.params());
        let xv = tape.input(x.clone());
        let h = layer(&mut tape, "gru.layer0", xv, false);
        let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
        let want = scalar_gru(m.params(), "gru.layer0", &rows, 2, false);
        for t in 0..3 {
            for i in 0..2 {
                assert!((tape.value(h)[[t, i]] - want[t][i]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn zero_weights_stay_at_zero_state() {
        let (mut m, x) = tiny();
        zero_all(&mut m);
        let mut tape = Tape::new(m.params());
        let xv = tape.input(x);
        let h = layer(&mut tape, "gru.layer0", xv, false);
        assert!(tape.value(h).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn causal() {
        let cfg = ModelConfig::new(Arch::Gru, 3, 4, 2, 9);
        let mut m = Model::new(cfg, 1).unwrap();
        randomize(&mut m, 0.6, 2);
        let x = input(12, 3, 3);
        let base = m.posteriors(&x).unwrap();
        let mut xp = x.clone();
        xp.row_mut(8).fill(5.0);
        let p = m.posteriors(&xp).unwrap();
        for t in 0..8 {
            assert_eq!(p.view().row(t), base.view().row(t));
        }
        assert_ne!(p.view().row(8), base.view().row(8));
    }
}
