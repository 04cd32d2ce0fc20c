//! Frame-level classifiers: DNN, dilated TCN, GRU and BiGRU, each ending in
//! the same framewise two-layer MLP head.

mod bigru;
mod dnn;
mod dtcnn;
mod gru;
mod head;
pub mod params;
pub mod tape;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use bigru::bigru_forward;
pub use dnn::{build_context_windows, dnn_forward};
pub use dtcnn::{dilation_schedule, dtcnn_forward, receptive_field};
pub use gru::gru_forward;
pub use head::classifier_head;
pub use params::{ParameterSet, Tensor};
pub use tape::{ParamGrads, Tape, Var};

use crate::error::{Error, Result};
use crate::exec::Execution;

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;
/// Momentum of batch-norm running statistics.
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Dnn,
    Dtcnn,
    Gru,
    Bigru,
}

impl Arch {
    pub fn is_recurrent(self) -> bool {
        matches!(self, Arch::Gru | Arch::Bigru)
    }

    /// Training sequence length for this family.
    pub fn default_chunk_len(self) -> usize {
        if self.is_recurrent() {
            3000
        } else {
            12000
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Arch::Dnn => "dnn",
            Arch::Dtcnn => "dtcnn",
            Arch::Gru => "gru",
            Arch::Bigru => "bigru",
        }
    }
}

impl std::str::FromStr for Arch {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dnn" => Ok(Arch::Dnn),
            "dtcnn" => Ok(Arch::Dtcnn),
            "gru" => Ok(Arch::Gru),
            "bigru" => Ok(Arch::Bigru),
            other => Err(Error::InvalidArgument(format!("unknown architecture {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    #[default]
    Layer,
    Instance,
    Batch,
}

fn default_context() -> usize {
    5
}
fn default_dilation_base() -> f64 {
    2.0
}
fn default_kernel() -> usize {
    3
}
fn default_slope() -> f64 {
    DEFAULT_LEAKY_SLOPE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub arch: Arch,
    /// May be left 0 in config files; filled from the training data.
    #[serde(default)]
    pub input_dim: usize,
    pub hidden_size: usize,
    pub n_layers: usize,
    #[serde(default)]
    pub dropout_rate: f64,
    /// Frames of context on each side (dnn only).
    #[serde(default = "default_context")]
    pub context_k: usize,
    /// dtcnn only.
    #[serde(default = "default_dilation_base")]
    pub dilation_base: f64,
    /// dtcnn only; must be odd.
    #[serde(default = "default_kernel")]
    pub kernel_size: usize,
    /// dnn and dtcnn only.
    #[serde(default)]
    pub norm_kind: NormKind,
    /// May be left 0 in config files; filled from the label scheme.
    #[serde(default)]
    pub n_classes: usize,
    #[serde(default = "default_slope")]
    pub leaky_slope: f64,
}

impl ModelConfig {
    pub fn new(arch: Arch, input_dim: usize, hidden_size: usize, n_layers: usize, n_classes: usize) -> Self {
        Self {
            arch,
            input_dim,
            hidden_size,
            n_layers,
            dropout_rate: 0.0,
            context_k: default_context(),
            dilation_base: default_dilation_base(),
            kernel_size: default_kernel(),
            norm_kind: NormKind::default(),
            n_classes,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("model config: {m}")));
        if self.input_dim == 0 || self.hidden_size == 0 || self.n_layers == 0 {
            return bad("input_dim, hidden_size and n_layers must be positive");
        }
        if !matches!(self.n_classes, 4 | 5 | 9) {
            return bad("n_classes must be 4, 5 or 9");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout_rate must lie in [0, 1)");
        }
        if self.dilation_base < 1.0 || !self.dilation_base.is_finite() {
            return bad("dilation_base must be >= 1");
        }
        if self.kernel_size == 0 || self.kernel_size.is_multiple_of(2) {
            return bad("kernel_size must be odd");
        }
        if !self.leaky_slope.is_finite() {
            return bad("leaky_slope must be finite");
        }
        Ok(())
    }
}

/// Row-stochastic `T x C` class probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Posteriors(Array2<f64>);

impl Posteriors {
    /// Wrap a matrix after checking rows are distributions within 1e-6.
    pub fn new(probs: Array2<f64>) -> Result<Self> {
        for (t, row) in probs.rows().into_iter().enumerate() {
            let sum: f64 = row.sum();
            if (sum - 1.0).abs() > 1e-6 || row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::InvalidArgument(format!(
                    "posterior row {t} is not a probability distribution"
                )));
            }
        }
        Ok(Self(probs))
    }

    pub(crate) fn from_softmax(probs: Array2<f64>) -> Self {
        Self(probs)
    }

    /// Every frame gets the same distribution.
    pub fn constant(frames: usize, dist: &[f64]) -> Result<Self> {
        let probs = Array2::from_shape_fn((frames, dist.len()), |(_, c)| dist[c]);
        Self::new(probs)
    }

    pub fn frames(&self) -> usize {
        self.0.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.0.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    /// Hard decisions; ties go to the lowest class index.
    pub fn argmax(&self) -> Vec<usize> {
        self.0
            .rows()
            .into_iter()
            .map(|row| {
                let mut best = 0;
                for (c, &p) in row.iter().enumerate() {
                    if p > row[best] {
                        best = c;
                    }
                }
                best
            })
            .collect()
    }
}

/// Forward-pass mode. Training enables dropout and batch statistics.
pub enum Mode<'r> {
    Eval,
    Train(&'r mut ChaCha8Rng),
}

impl Mode<'_> {
    pub fn is_train(&self) -> bool {
        matches!(self, Mode::Train(_))
    }
}

/// Per-sequence batch-norm statistics observed during a training forward pass.
#[derive(Debug, Clone)]
pub struct BatchStat {
    pub prefix: String,
    pub mean: Array1<f64>,
    /// Unbiased variance.
    pub var: Array1<f64>,
}

/// Shared state threaded through one forward pass.
pub(crate) struct Ctx<'m, 'r> {
    pub config: &'m ModelConfig,
    pub mode: Mode<'r>,
    pub batch_stats: Vec<BatchStat>,
}

impl Ctx<'_, '_> {
    pub fn dropout(&mut self, tape: &mut Tape<'_>, x: Var) -> Var {
        let p = self.config.dropout_rate;
        let Mode::Train(rng) = &mut self.mode else {
            return x;
        };
        if p == 0.0 {
            return x;
        }
        let keep = 1.0 / (1.0 - p);
        let dim = tape.value(x).raw_dim();
        let mask = Array2::from_shape_simple_fn(dim, || if rng.random::<f64>() < p { 0.0 } else { keep });
        tape.mask(x, mask)
    }

    pub fn lrelu(&self, tape: &mut Tape<'_>, x: Var) -> Var {
        tape.leaky_relu(x, self.config.leaky_slope)
    }

    pub fn norm(&mut self, tape: &mut Tape<'_>, prefix: &str, x: Var) -> Var {
        let gain = tape.param(&format!("{prefix}.gain"));
        let bias = tape.param(&format!("{prefix}.bias"));
        match self.config.norm_kind {
            NormKind::Layer => tape.row_norm(x, gain, bias),
            NormKind::Instance => tape.col_norm(x, gain, bias),
            NormKind::Batch if self.mode.is_train() => {
                let v = tape.value(x);
                let n = v.nrows() as f64;
                let mean = v.mean_axis(Axis(0)).expect("non-empty sequence");
                let var = v.var_axis(Axis(0), if n > 1.0 { 1.0 } else { 0.0 });
                self.batch_stats.push(BatchStat {
                    prefix: prefix.to_string(),
                    mean,
                    var,
                });
                tape.col_norm(x, gain, bias)
            }
            NormKind::Batch => {
                let params = tape.params();
                let mean = params
                    .get(&format!("{prefix}.running_mean"))
                    .expect("running mean present");
                let var = params
                    .get(&format!("{prefix}.running_var"))
                    .expect("running var present");
                tape.fixed_norm(x, mean, var, gain, bias)
            }
        }
    }
}

pub(crate) fn insert_norm(params: &mut ParameterSet, prefix: &str, dim: usize, kind: NormKind) {
    params.insert(format!("{prefix}.gain"), Array2::ones((1, dim)), true);
    params.insert(format!("{prefix}.bias"), Array2::zeros((1, dim)), true);
    if kind == NormKind::Batch {
        params.insert(format!("{prefix}.running_mean"), Array2::zeros((1, dim)), false);
        params.insert(format!("{prefix}.running_var"), Array2::ones((1, dim)), false);
    }
}

/// A configured classifier with its weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: ModelConfig,
    params: ParameterSet,
}

impl Model {
    /// Fresh model with seeded uniform initialization.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParameterSet::new();
        let h = match config.arch {
            Arch::Dnn => dnn::init(&config, &mut params, &mut rng),
            Arch::Dtcnn => dtcnn::init(&config, &mut params, &mut rng),
            Arch::Gru => gru::init(&config, &mut params, &mut rng),
            Arch::Bigru => bigru::init(&config, &mut params, &mut rng),
        };
        head::init(h, config.n_classes, &mut params, &mut rng);
        Ok(Self { config, params })
    }

    /// Reassemble a model from stored tensors, checking names and shapes.
    pub fn from_parts(config: ModelConfig, params: ParameterSet) -> Result<Self> {
        let reference = Model::new(config.clone(), 0)?;
        if reference.params.len() != params.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} tensors, found {}",
                reference.params.len(),
                params.len()
            )));
        }
        for t in reference.params.tensors() {
            let got = params.get(&t.name)?;
            if got.dim() != t.value.dim() {
                return Err(Error::InvalidArgument(format!(
                    "tensor {} has shape {:?}, expected {:?}",
                    t.name,
                    got.dim(),
                    t.value.dim()
                )));
            }
        }
        if !params.all_finite() {
            return Err(Error::InvalidArgument("non-finite parameter value".into()));
        }
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParameterSet {
        &mut self.params
    }

    /// Record the forward pass on `tape` and return the logits node.
    pub fn forward<'p>(
        &'p self,
        tape: &mut Tape<'p>,
        x: &Array2<f64>,
        mode: Mode<'_>,
    ) -> Result<(Var, Vec<BatchStat>)> {
        if x.ncols() != self.config.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.config.input_dim,
                actual: x.ncols(),
                context: "model input features",
            });
        }
        if x.nrows() == 0 {
            return Err(Error::EmptyInput("feature sequence"));
        }
        let mut ctx = Ctx {
            config: &self.config,
            mode,
            batch_stats: Vec::new(),
        };
        let h = match self.config.arch {
            Arch::Dnn => dnn::body(tape, &mut ctx, x),
            Arch::Dtcnn => dtcnn::body(tape, &mut ctx, x),
            Arch::Gru => gru::body(tape, &mut ctx, x),
            Arch::Bigru => bigru::body(tape, &mut ctx, x),
        };
        let h = ctx.dropout(tape, h);
        let logits = head::logits(tape, &ctx, h);
        Ok((logits, ctx.batch_stats))
    }

    /// Eval-mode posteriors over the whole sequence.
    pub fn posteriors(&self, x: &Array2<f64>) -> Result<Posteriors> {
        let mut tape = Tape::new(&self.params);
        let (logits, _) = self.forward(&mut tape, x, Mode::Eval)?;
        Ok(Posteriors::from_softmax(tape::softmax_rows(tape.value(logits))))
    }

    /// Eval-mode posteriors computed over consecutive chunks of `chunk_len`
    /// frames, matching the sequence lengths seen in training.
    pub fn posteriors_chunked(&self, x: &Array2<f64>, chunk_len: usize, exec: Execution) -> Result<Posteriors> {
        if chunk_len == 0 {
            return Err(Error::InvalidArgument("chunk_len must be positive".into()));
        }
        let t = x.nrows();
        let n = t.div_ceil(chunk_len);
        let parts = exec.try_map(n, |i| {
            let end = ((i + 1) * chunk_len).min(t);
            self.posteriors(&x.slice(s![i * chunk_len..end, ..]).to_owned())
        })?;
        let mut out = Array2::zeros((t, self.config.n_classes));
        for (i, p) in parts.into_iter().enumerate() {
            let start = i * chunk_len;
            out.slice_mut(s![start..start + p.frames(), ..]).assign(&p.0);
        }
        Ok(Posteriors(out))
    }

    /// Blend observed batch statistics into the running buffers.
    pub fn update_running_stats(&mut self, stats: &[BatchStat]) -> Result<()> {
        for st in stats {
            for (suffix, val) in [("running_mean", &st.mean), ("running_var", &st.var)] {
                let buf = self.params.get_mut(&format!("{}.{suffix}", st.prefix))?;
                buf.zip_mut_with(&val.view().insert_axis(Axis(0)), |r, &v| {
                    *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * v
                });
            }
        }
        Ok(())
    }
}

/// Softmax posteriors from a model for a full input, in eval mode.
pub(crate) fn eval_with(params: &ParameterSet, config: &ModelConfig, x: &Array2<f64>) -> Result<Posteriors> {
    let model = Model::from_parts(config.clone(), params.clone())?;
    model.posteriors(x)
}
