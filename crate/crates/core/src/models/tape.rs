//! A small reverse-mode tape over dense matrices.
//!
//! Operations are recorded at layer granularity (affine maps, whole-sequence
//! GRU scans, dilated convolutions, normalizations, the loss), each with a
//! hand-written backward pass. Parameters are referenced from a borrowed
//! [`ParameterSet`] and never copied onto the tape.

use ndarray::{s, Array1, Array2, Axis};

use super::params::ParameterSet;

pub type Mat = Array2<f64>;

pub const NORM_EPS: f64 = 1e-5;
pub const PROB_FLOOR: f64 = 1e-12;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
struct GruCache {
    r: Mat,
    z: Mat,
    n: Mat,
    /// `W_hn h_prev + b_hn`
    u: Mat,
}

#[derive(Debug)]
enum Op {
    Input,
    Param(usize),
    Linear {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    Add(Var, Var),
    LeakyRelu {
        x: Var,
        slope: f64,
    },
    Mask {
        x: Var,
        mask: Mat,
    },
    /// Normalize each row over its columns.
    RowNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Mat,
        inv_std: Array1<f64>,
    },
    /// Normalize each column over the rows (instance norm, batch norm in training).
    ColNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Mat,
        inv_std: Array1<f64>,
    },
    /// Normalize each column with fixed statistics (batch norm in evaluation).
    FixedNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Mat,
        inv_std: Array1<f64>,
    },
    Conv1d {
        x: Var,
        w: Var,
        b: Var,
        kernel: usize,
        dilation: usize,
        cols: Mat,
    },
    Gru {
        ar: Var,
        az: Var,
        an: Var,
        whr: Var,
        whz: Var,
        whn: Var,
        bhn: Var,
        reverse: bool,
        cache: GruCache,
    },
    FocalLoss {
        logits: Var,
        targets: Vec<usize>,
        weights: Vec<f64>,
        gamma: f64,
        probs: Mat,
    },
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Option<Mat>,
}

/// Gradients aligned with a [`ParameterSet`]; `None` for untouched tensors.
pub type ParamGrads = Vec<Option<Mat>>;

pub struct Tape<'p> {
    params: &'p ParameterSet,
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParameterSet) -> Self {
        Self {
            params,
            nodes: Vec::new(),
            param_vars: vec![None; params.len()],
        }
    }

    pub fn params(&self) -> &'p ParameterSet {
        self.params
    }

    fn push(&mut self, op: Op, value: Mat) -> Var {
        self.nodes.push(Node { op, value: Some(value) });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Mat {
        match &self.nodes[v.0] {
            Node { op: Op::Param(i), .. } => self.params.value(*i),
            Node { value, .. } => value.as_ref().expect("node value"),
        }
    }

    pub fn input(&mut self, value: Mat) -> Var {
        self.push(Op::Input, value)
    }

    /// Variable for the named parameter tensor (panics if absent; model
    /// builders construct names from their own config).
    pub fn param(&mut self, name: &str) -> Var {
        let i = self
            .params
            .position(name)
            .unwrap_or_else(|| panic!("missing parameter tensor {name}"));
        if let Some(v) = self.param_vars[i] {
            return v;
        }
        self.nodes.push(Node {
            op: Op::Param(i),
            value: None,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars[i] = Some(v);
        v
    }

    /// `x W^T + b`, with `W` stored `out x in` and `b` as a `1 x out` row.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Var {
        let mut y = self.value(x).dot(&self.value(w).t());
        if let Some(b) = b {
            y += &self.value(b).row(0);
        }
        self.push(Op::Linear { x, w, b }, y)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let y = self.value(a) + self.value(b);
        self.push(Op::Add(a, b), y)
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Var {
        let y = self.value(x).mapv(|v| if v > 0.0 { v } else { slope * v });
        self.push(Op::LeakyRelu { x, slope }, y)
    }

    /// Elementwise product with a constant mask (inverted dropout).
    pub fn mask(&mut self, x: Var, mask: Mat) -> Var {
        let y = self.value(x) * &mask;
        self.push(Op::Mask { x, mask }, y)
    }

    pub fn row_norm(&mut self, x: Var, gain: Var, bias: Var) -> Var {
        let xv = self.value(x);
        let mean = xv.mean_axis(Axis(1)).expect("non-empty row");
        let centered = xv - &mean.view().insert_axis(Axis(1));
        let var = centered.mapv(|v| v * v).mean_axis(Axis(1)).expect("non-empty row");
        let inv_std = var.mapv(|v| 1.0 / (v + NORM_EPS).sqrt());
        let xhat = centered * inv_std.view().insert_axis(Axis(1));
        let y = &xhat * &self.value(gain).row(0) + self.value(bias).row(0);
        self.push(
            Op::RowNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
            y,
        )
    }

    pub fn col_norm(&mut self, x: Var, gain: Var, bias: Var) -> Var {
        let (xhat, inv_std) = {
            let xv = self.value(x);
            let mean = xv.mean_axis(Axis(0)).expect("non-empty column");
            let centered = xv - &mean;
            let var = centered.mapv(|v| v * v).mean_axis(Axis(0)).expect("non-empty column");
            let inv_std = var.mapv(|v| 1.0 / (v + NORM_EPS).sqrt());
            (centered * &inv_std, inv_std)
        };
        let y = &xhat * &self.value(gain).row(0) + self.value(bias).row(0);
        self.push(
            Op::ColNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
            y,
        )
    }

    pub fn fixed_norm(&mut self, x: Var, mean: &Mat, var: &Mat, gain: Var, bias: Var) -> Var {
        let inv_std = var.row(0).mapv(|v| 1.0 / (v + NORM_EPS).sqrt());
        let xhat = (self.value(x) - &mean.row(0)) * &inv_std;
        let y = &xhat * &self.value(gain).row(0) + self.value(bias).row(0);
        self.push(
            Op::FixedNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
            y,
        )
    }

    /// Same-length, non-causal dilated convolution over time (rows) with
    /// zero padding. `w` is `out x (kernel * in)`, tap-major.
    pub fn conv1d(&mut self, x: Var, w: Var, b: Var, kernel: usize, dilation: usize) -> Var {
        let cols = im2col(self.value(x), kernel, dilation);
        let mut y = cols.dot(&self.value(w).t());
        y += &self.value(b).row(0);
        self.push(
            Op::Conv1d {
                x,
                w,
                b,
                kernel,
                dilation,
                cols,
            },
            y,
        )
    }

    /// Full GRU scan given precomputed input projections
    /// `a_r = W_ir x + b_r`, `a_z = W_iz x + b_z`, `a_n = W_in x + b_in`.
    /// With `reverse`, the recurrence runs from the last frame to the first.
    #[allow(clippy::too_many_arguments)]
    pub fn gru(&mut self, ar: Var, az: Var, an: Var, whr: Var, whz: Var, whn: Var, bhn: Var, reverse: bool) -> Var {
        let (h, cache) = gru_scan(
            self.value(ar),
            self.value(az),
            self.value(an),
            self.value(whr),
            self.value(whz),
            self.value(whn),
            self.value(bhn),
            reverse,
        );
        self.push(
            Op::Gru {
                ar,
                az,
                an,
                whr,
                whz,
                whn,
                bhn,
                reverse,
                cache,
            },
            h,
        )
    }

    /// Summed class-balanced focal loss over rows of `logits` (a `1 x 1` node).
    pub fn focal_loss(&mut self, logits: Var, targets: Vec<usize>, weights: Vec<f64>, gamma: f64) -> Var {
        let probs = softmax_rows(self.value(logits));
        let total: f64 = targets
            .iter()
            .enumerate()
            .map(|(i, &y)| focal_term(probs[[i, y]], weights[y], gamma))
            .sum();
        self.push(
            Op::FocalLoss {
                logits,
                targets,
                weights,
                gamma,
                probs,
            },
            Array2::from_elem((1, 1), total),
        )
    }

    /// Reverse pass from a scalar node. Returns gradients per parameter tensor.
    pub fn backward(&self, root: Var) -> ParamGrads {
        let mut grads: Vec<Option<Mat>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Array2::ones(self.value(root).raw_dim()));
        let mut out: ParamGrads = vec![None; self.params.len()];

        fn acc(grads: &mut [Option<Mat>], v: Var, g: Mat) {
            match &mut grads[v.0] {
                Some(existing) => *existing += &g,
                slot => *slot = Some(g),
            }
        }

        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            match &self.nodes[idx].op {
                Op::Input => {}
                Op::Param(i) => out[*i] = Some(g),
                Op::Linear { x, w, b } => {
                    acc(&mut grads, *x, g.dot(self.value(*w)));
                    acc(&mut grads, *w, g.t().dot(self.value(*x)));
                    if let Some(b) = b {
                        acc(&mut grads, *b, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    }
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *b, g.clone());
                    acc(&mut grads, *a, g);
                }
                Op::LeakyRelu { x, slope } => {
                    let mut dx = g;
                    dx.zip_mut_with(self.value(*x), |d, &v| {
                        if v <= 0.0 {
                            *d *= slope
                        }
                    });
                    acc(&mut grads, *x, dx);
                }
                Op::Mask { x, mask } => acc(&mut grads, *x, g * mask),
                Op::RowNorm {
                    x,
                    gain,
                    bias,
                    xhat,
                    inv_std,
                } => {
                    acc(&mut grads, *gain, (&g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(&mut grads, *bias, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    let dxhat = &g * &self.value(*gain).row(0);
                    let m1 = dxhat.mean_axis(Axis(1)).unwrap().insert_axis(Axis(1));
                    let m2 = (&dxhat * xhat).mean_axis(Axis(1)).unwrap().insert_axis(Axis(1));
                    let dx = (dxhat - &m1 - &(xhat * &m2)) * inv_std.view().insert_axis(Axis(1));
                    acc(&mut grads, *x, dx);
                }
                Op::ColNorm {
                    x,
                    gain,
                    bias,
                    xhat,
                    inv_std,
                } => {
                    acc(&mut grads, *gain, (&g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(&mut grads, *bias, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    let dxhat = &g * &self.value(*gain).row(0);
                    let m1 = dxhat.mean_axis(Axis(0)).unwrap();
                    let m2 = (&dxhat * xhat).mean_axis(Axis(0)).unwrap();
                    let dx = (dxhat - &m1 - &(xhat * &m2)) * inv_std;
                    acc(&mut grads, *x, dx);
                }
                Op::FixedNorm {
                    x,
                    gain,
                    bias,
                    xhat,
                    inv_std,
                } => {
                    acc(&mut grads, *gain, (&g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(&mut grads, *bias, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    let dx = &g * &self.value(*gain).row(0) * inv_std;
                    acc(&mut grads, *x, dx);
                }
                Op::Conv1d {
                    x,
                    w,
                    b,
                    kernel,
                    dilation,
                    cols,
                } => {
                    acc(&mut grads, *w, g.t().dot(cols));
                    acc(&mut grads, *b, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    let dcols = g.dot(self.value(*w));
                    let xv = self.value(*x);
                    acc(
                        &mut grads,
                        *x,
                        col2im(&dcols, xv.nrows(), xv.ncols(), *kernel, *dilation),
                    );
                }
                Op::Gru {
                    ar,
                    az,
                    an,
                    whr,
                    whz,
                    whn,
                    bhn,
                    reverse,
                    cache,
                } => {
                    let gg = gru_backward(
                        &g,
                        self.value(Var(idx)),
                        cache,
                        self.value(*whr),
                        self.value(*whz),
                        self.value(*whn),
                        *reverse,
                    );
                    acc(&mut grads, *ar, gg.dar);
                    acc(&mut grads, *az, gg.daz);
                    acc(&mut grads, *an, gg.dan);
                    acc(&mut grads, *whr, gg.dwhr);
                    acc(&mut grads, *whz, gg.dwhz);
                    acc(&mut grads, *whn, gg.dwhn);
                    acc(&mut grads, *bhn, gg.dbhn);
                }
                Op::FocalLoss {
                    logits,
                    targets,
                    weights,
                    gamma,
                    probs,
                } => {
                    let scale = g[[0, 0]];
                    let mut dz = Array2::zeros(probs.raw_dim());
                    for (i, &y) in targets.iter().enumerate() {
                        let py = probs[[i, y]];
                        let dldp = focal_dp(py, weights[y], *gamma);
                        if dldp == 0.0 {
                            continue;
                        }
                        let mut row = dz.row_mut(i);
                        for (j, d) in row.iter_mut().enumerate() {
                            let delta = if j == y { 1.0 } else { 0.0 };
                            *d = scale * dldp * py * (delta - probs[[i, j]]);
                        }
                    }
                    acc(&mut grads, *logits, dz);
                }
            }
        }
        out
    }
}

/// `-w (1 - p)^gamma ln(max(p, floor))`
pub fn focal_term(p: f64, weight: f64, gamma: f64) -> f64 {
    let pc = p.max(PROB_FLOOR);
    let focus = if gamma == 0.0 {
        1.0
    } else {
        (1.0 - p).max(0.0).powf(gamma)
    };
    -weight * focus * pc.ln()
}

/// d focal_term / dp. Zero where the probability floor is active.
fn focal_dp(p: f64, weight: f64, gamma: f64) -> f64 {
    if p < PROB_FLOOR {
        return 0.0;
    }
    let q = (1.0 - p).max(0.0);
    let focus = if gamma == 0.0 { 1.0 } else { q.powf(gamma) };
    let focus_grad = if gamma == 0.0 || q == 0.0 {
        0.0
    } else {
        -gamma * q.powf(gamma - 1.0)
    };
    -weight * (focus_grad * p.ln() + focus / p)
}

pub fn softmax_rows(z: &Mat) -> Mat {
    let mut p = z.clone();
    for mut row in p.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row /= s;
    }
    p
}

fn im2col(x: &Mat, kernel: usize, dilation: usize) -> Mat {
    let (t, c) = x.dim();
    let half = (kernel as i64 - 1) / 2;
    let mut cols = Array2::zeros((t, kernel * c));
    for j in 0..kernel {
        let off = (j as i64 - half) * dilation as i64;
        // rows t with 0 <= t + off < T
        let lo = (-off).max(0) as usize;
        let hi = ((t as i64 - off).min(t as i64)).max(0) as usize;
        if lo < hi {
            let src = x.slice(s![(lo as i64 + off) as usize..(hi as i64 + off) as usize, ..]);
            cols.slice_mut(s![lo..hi, j * c..(j + 1) * c]).assign(&src);
        }
    }
    cols
}

fn col2im(dcols: &Mat, t: usize, c: usize, kernel: usize, dilation: usize) -> Mat {
    let half = (kernel as i64 - 1) / 2;
    let mut dx = Array2::zeros((t, c));
    for j in 0..kernel {
        let off = (j as i64 - half) * dilation as i64;
        let lo = (-off).max(0) as usize;
        let hi = ((t as i64 - off).min(t as i64)).max(0) as usize;
        if lo < hi {
            let mut dst = dx.slice_mut(s![(lo as i64 + off) as usize..(hi as i64 + off) as usize, ..]);
            dst += &dcols.slice(s![lo..hi, j * c..(j + 1) * c]);
        }
    }
    dx
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn matvec(w: &Mat, h: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(w.rows()) {
        *o = row.iter().zip(h).map(|(a, b)| a * b).sum();
    }
}

/// Accumulate `out += v^T W` (i.e. `W^T v`).
fn vecmat_acc(v: &[f64], w: &Mat, out: &mut [f64]) {
    for (vi, row) in v.iter().zip(w.rows()) {
        if *vi != 0.0 {
            for (o, wij) in out.iter_mut().zip(row.iter()) {
                *o += vi * wij;
            }
        }
    }
}

fn outer_acc(g: &mut Mat, v: &[f64], h: &[f64]) {
    for (i, mut row) in g.rows_mut().into_iter().enumerate() {
        let vi = v[i];
        if vi != 0.0 {
            for (gij, hj) in row.iter_mut().zip(h) {
                *gij += vi * hj;
            }
        }
    }
}

fn time_order(t: usize, reverse: bool) -> Box<dyn Iterator<Item = usize>> {
    if reverse {
        Box::new((0..t).rev())
    } else {
        Box::new(0..t)
    }
}

#[allow(clippy::too_many_arguments)]
fn gru_scan(
    ar: &Mat,
    az: &Mat,
    an: &Mat,
    whr: &Mat,
    whz: &Mat,
    whn: &Mat,
    bhn: &Mat,
    reverse: bool,
) -> (Mat, GruCache) {
    let (t_len, h) = ar.dim();
    let mut out = Array2::zeros((t_len, h));
    let mut cache = GruCache {
        r: Array2::zeros((t_len, h)),
        z: Array2::zeros((t_len, h)),
        n: Array2::zeros((t_len, h)),
        u: Array2::zeros((t_len, h)),
    };
    let mut prev = vec![0.0; h];
    let (mut ur, mut uz, mut un) = (vec![0.0; h], vec![0.0; h], vec![0.0; h]);
    let bhn = bhn.row(0);
    for t in time_order(t_len, reverse) {
        matvec(whr, &prev, &mut ur);
        matvec(whz, &prev, &mut uz);
        matvec(whn, &prev, &mut un);
        for i in 0..h {
            let r = sigmoid(ar[[t, i]] + ur[i]);
            let z = sigmoid(az[[t, i]] + uz[i]);
            let u = un[i] + bhn[i];
            let n = (an[[t, i]] + r * u).tanh();
            let hi = (1.0 - z) * n + z * prev[i];
            cache.r[[t, i]] = r;
            cache.z[[t, i]] = z;
            cache.n[[t, i]] = n;
            cache.u[[t, i]] = u;
            out[[t, i]] = hi;
        }
        prev.copy_from_slice(out.row(t).as_slice().expect("contiguous row"));
    }
    (out, cache)
}

struct GruGrads {
    dar: Mat,
    daz: Mat,
    dan: Mat,
    dwhr: Mat,
    dwhz: Mat,
    dwhn: Mat,
    dbhn: Mat,
}

fn gru_backward(g_out: &Mat, hs: &Mat, cache: &GruCache, whr: &Mat, whz: &Mat, whn: &Mat, reverse: bool) -> GruGrads {
    let (t_len, h) = hs.dim();
    let mut gg = GruGrads {
        dar: Array2::zeros((t_len, h)),
        daz: Array2::zeros((t_len, h)),
        dan: Array2::zeros((t_len, h)),
        dwhr: Array2::zeros((h, h)),
        dwhz: Array2::zeros((h, h)),
        dwhn: Array2::zeros((h, h)),
        dbhn: Array2::zeros((1, h)),
    };
    let zero = vec![0.0; h];
    let mut carry = vec![0.0; h];
    let (mut dr_pre, mut dz_pre, mut dn_pre, mut du) = (vec![0.0; h], vec![0.0; h], vec![0.0; h], vec![0.0; h]);
    let mut prev_buf = vec![0.0; h];
    // walk opposite to the forward recurrence
    for t in time_order(t_len, !reverse) {
        let prev_t = if reverse {
            (t + 1 < t_len).then_some(t + 1)
        } else {
            t.checked_sub(1)
        };
        let prev: &[f64] = match prev_t {
            Some(p) => {
                prev_buf.copy_from_slice(hs.row(p).as_slice().expect("contiguous row"));
                &prev_buf
            }
            None => &zero,
        };
        let mut dprev = vec![0.0; h];
        for i in 0..h {
            let dh = g_out[[t, i]] + carry[i];
            let (r, z, n, u) = (cache.r[[t, i]], cache.z[[t, i]], cache.n[[t, i]], cache.u[[t, i]]);
            let dn = dh * (1.0 - z);
            let dz = dh * (prev[i] - n);
            dprev[i] = dh * z;
            let dan = dn * (1.0 - n * n);
            dn_pre[i] = dan;
            let dr = dan * u;
            du[i] = dan * r;
            dr_pre[i] = dr * r * (1.0 - r);
            dz_pre[i] = dz * z * (1.0 - z);
            gg.dar[[t, i]] = dr_pre[i];
            gg.daz[[t, i]] = dz_pre[i];
            gg.dan[[t, i]] = dn_pre[i];
            gg.dbhn[[0, i]] += du[i];
        }
        outer_acc(&mut gg.dwhr, &dr_pre, prev);
        outer_acc(&mut gg.dwhz, &dz_pre, prev);
        outer_acc(&mut gg.dwhn, &du, prev);
        vecmat_acc(&dr_pre, whr, &mut dprev);
        vecmat_acc(&dz_pre, whz, &mut dprev);
        vecmat_acc(&du, whn, &mut dprev);
        carry = dprev;
    }
    gg
}
