use ndarray::Array2;

use super::loss::{focal_loss_node, LossConfig};
use crate::error::Result;
use crate::models::{Mode, Model, Tape};

#[derive(Debug, Clone, PartialEq)]
pub struct TensorGradCheck {
    pub name: String,
    /// `||analytic - numeric|| / max(||analytic||, ||numeric||)`
    pub rel_error: f64,
    pub analytic_norm: f64,
}

/// Frame-mean loss in eval mode.
pub fn eval_loss(model: &Model, x: &Array2<f64>, targets: &[usize], loss: &LossConfig) -> Result<f64> {
    let mut tape = Tape::new(model.params());
    let (logits, _) = model.forward(&mut tape, x, Mode::Eval)?;
    let l = focal_loss_node(&mut tape, logits, targets, loss)?;
    Ok(tape.value(l)[[0, 0]] / targets.len() as f64)
}

/// Compare reverse-mode gradients of the frame-mean loss against central
/// differences with step `h`, for every trainable tensor.
pub fn gradient_check(
    model: &Model,
    x: &Array2<f64>,
    targets: &[usize],
    loss: &LossConfig,
    h: f64,
) -> Result<Vec<TensorGradCheck>> {
    let analytic = {
        let mut tape = Tape::new(model.params());
        let (logits, _) = model.forward(&mut tape, x, Mode::Eval)?;
        let l = focal_loss_node(&mut tape, logits, targets, loss)?;
        tape.backward(l)
    };
    let scale = 1.0 / targets.len() as f64;
    let mut probe = model.clone();
    let mut out = Vec::new();
    for (i, t) in model.params().tensors().iter().enumerate() {
        if !t.trainable {
            continue;
        }
        let zero = Array2::zeros(t.value.raw_dim());
        let a = analytic[i].as_ref().map(|g| g * scale).unwrap_or(zero);
        let mut num = Array2::zeros(t.value.raw_dim());
        for idx in 0..t.value.len() {
            let (r, c) = (idx / t.value.ncols(), idx % t.value.ncols());
            let orig = t.value[[r, c]];
            probe.params_mut().tensors_mut()[i].value[[r, c]] = orig + h;
            let up = eval_loss(&probe, x, targets, loss)?;
            probe.params_mut().tensors_mut()[i].value[[r, c]] = orig - h;
            let down = eval_loss(&probe, x, targets, loss)?;
            probe.params_mut().tensors_mut()[i].value[[r, c]] = orig;
            num[[r, c]] = (up - down) / (2.0 * h);
        }
        let diff = (&a - &num).mapv(|v| v * v).sum().sqrt();
        let an = a.mapv(|v| v * v).sum().sqrt();
        let nn = num.mapv(|v| v * v).sum().sqrt();
        let denom = an.max(nn);
        out.push(TensorGradCheck {
            name: t.name.clone(),
            rel_error: if denom == 0.0 { 0.0 } else { diff / denom },
            analytic_norm: an,
        });
    }
    Ok(out)
}
