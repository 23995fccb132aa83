//! Small differentiable classifiers with hand-derived gradients, per-sample
//! gradient extraction and the SGD/momentum/cosine/clipping optimizer.
//!
//! Parameters are stored flat. The final linear layer always occupies the
//! tail of the vector, weights first (row-major `in × classes`) then bias:
//!
//! * logistic: `[W (d×C), b (C)]`
//! * mlp: `[W1 (d×h), b1 (h), W2 (h×C), b2 (C)]`

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::linalg::{self, Matrix};
use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
#[derive(Default)]
pub enum ModelKind {
    #[default]
    Logistic,
    Mlp { hidden: usize },
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    kind: ModelKind,
    input_dim: usize,
    classes: usize,
    params: Vec<f64>,
}

impl Model {
    pub fn param_len(kind: ModelKind, input_dim: usize, classes: usize) -> usize {
        match kind {
            ModelKind::Logistic => input_dim * classes + classes,
            ModelKind::Mlp { hidden } => input_dim * hidden + hidden + hidden * classes + classes,
        }
    }

    /// All-zero parameters.
    pub fn zeros(kind: ModelKind, input_dim: usize, classes: usize) -> Result<Self> {
        Self::check_shape(kind, input_dim, classes)?;
        Ok(Self {
            kind,
            input_dim,
            classes,
            params: vec![0.0; Self::param_len(kind, input_dim, classes)],
        })
    }

    /// Seeded initialisation: logistic starts at zero, the mlp hidden layer
    /// gets He-scaled Gaussian weights and the output layer Glorot-scaled
    /// ones. Biases start at zero.
    pub fn init(kind: ModelKind, input_dim: usize, classes: usize, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(kind, input_dim, classes)?;
        if let ModelKind::Mlp { hidden } = kind {
            let mut rng = rng::stream(seed, rng::STREAM_INIT);
            let he = Normal::new(0.0, libm::sqrt(2.0 / input_dim as f64)).expect("normal");
            let glorot =
                Normal::new(0.0, libm::sqrt(2.0 / (hidden + classes) as f64)).expect("normal");
            let (w1, rest) = model.params.split_at_mut(input_dim * hidden);
            for w in w1 {
                *w = he.sample(&mut rng);
            }
            for w in &mut rest[hidden..hidden + hidden * classes] {
                *w = glorot.sample(&mut rng);
            }
        }
        Ok(model)
    }

    pub fn from_params(
        kind: ModelKind,
        input_dim: usize,
        classes: usize,
        params: Vec<f64>,
    ) -> Result<Self> {
        Self::check_shape(kind, input_dim, classes)?;
        let expected = Self::param_len(kind, input_dim, classes);
        if params.len() != expected {
            return Err(Error::ShapeMismatch {
                context: "model parameters",
                expected,
                got: params.len(),
            });
        }
        Ok(Self {
            kind,
            input_dim,
            classes,
            params,
        })
    }

    fn check_shape(kind: ModelKind, input_dim: usize, classes: usize) -> Result<()> {
        if input_dim == 0 || classes == 0 {
            return Err(Error::InvalidArgument("model needs d >= 1 and C >= 1".into()));
        }
        if matches!(kind, ModelKind::Mlp { hidden: 0 }) {
            return Err(Error::InvalidArgument("mlp hidden width must be >= 1".into()));
        }
        Ok(())
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Width of the input to the final linear layer.
    pub fn head_input_dim(&self) -> usize {
        match self.kind {
            ModelKind::Logistic => self.input_dim,
            ModelKind::Mlp { hidden } => hidden,
        }
    }

    /// Coordinates of the final layer (weights then bias) inside `params`.
    pub fn last_layer_range(&self) -> Range<usize> {
        let len = (self.head_input_dim() + 1) * self.classes;
        self.params.len() - len..self.params.len()
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim {
            return Err(Error::ShapeMismatch {
                context: "model input",
                expected: self.input_dim,
                got: x.cols(),
            });
        }
        Ok(())
    }

    /// Inputs of the final linear layer: `x` itself for logistic, the ReLU
    /// hidden activations for the mlp.
    pub fn head_features(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        match self.kind {
            ModelKind::Logistic => Ok(x.clone()),
            ModelKind::Mlp { hidden } => {
                let mut out = Matrix::zeros(x.rows(), hidden);
                for i in 0..x.rows() {
                    hidden_layer(&self.params, self.input_dim, hidden, x.row(i), out.row_mut(i));
                    for a in out.row_mut(i) {
                        *a = a.max(0.0);
                    }
                }
                Ok(out)
            }
        }
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let head = self.head_features(x)?;
        let range = self.last_layer_range();
        let last = &self.params[range];
        let mut logits = Matrix::zeros(x.rows(), self.classes);
        for i in 0..x.rows() {
            head_logits(last, head.row(i), logits.row_mut(i));
        }
        Ok(logits)
    }

    /// Argmax-logit predictions, ties to the lowest class index.
    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        let logits = self.forward(x)?;
        Ok(logits.iter_rows().map(argmax_first).collect())
    }
}

pub(crate) fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = j;
        }
    }
    best
}

/// Pre-activations `x W1 + b1` of the mlp hidden layer.
fn hidden_layer(params: &[f64], d: usize, hidden: usize, x: &[f64], out: &mut [f64]) {
    let w1 = &params[..d * hidden];
    let b1 = &params[d * hidden..d * hidden + hidden];
    out.copy_from_slice(b1);
    for (k, &xk) in x.iter().enumerate() {
        if xk != 0.0 {
            linalg::axpy(xk, &w1[k * hidden..(k + 1) * hidden], out);
        }
    }
}

/// `logits = phi W + b` for a final layer stored as `[W (m×C), b (C)]`.
fn head_logits(last: &[f64], phi: &[f64], logits: &mut [f64]) {
    let classes = logits.len();
    let m = phi.len();
    logits.copy_from_slice(&last[m * classes..]);
    for (k, &pk) in phi.iter().enumerate() {
        if pk != 0.0 {
            linalg::axpy(pk, &last[k * classes..(k + 1) * classes], logits);
        }
    }
}

/// Softmax cross-entropy of `logits` against `label`; leaves `p − onehot`
/// in `logits`.
fn softmax_xent_in_place(logits: &mut [f64], label: usize) -> f64 {
    let max = logits.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mut z = 0.0;
    for v in logits.iter_mut() {
        *v = libm::exp(*v - max);
        z += *v;
    }
    let loss = libm::log(z) - libm::log(logits[label]);
    for v in logits.iter_mut() {
        *v /= z;
    }
    logits[label] -= 1.0;
    loss
}

/// Adds `coef · ∇ℓ(x, label)` to `grad` (full parameter vector) and returns
/// `ℓ`. When `last_only` is set only the final-layer block of `grad` is
/// written and the backward pass stops there.
fn accumulate_sample(
    model: &Model,
    x: &[f64],
    label: usize,
    coef: f64,
    grad: &mut [f64],
    last_only: bool,
    scratch: &mut Scratch,
) -> f64 {
    let classes = model.classes;
    let range = model.last_layer_range();
    let last = &model.params[range.clone()];
    let phi: &[f64] = match model.kind {
        ModelKind::Logistic => x,
        ModelKind::Mlp { hidden } => {
            hidden_layer(&model.params, model.input_dim, hidden, x, &mut scratch.pre);
            for (a, &z) in scratch.act.iter_mut().zip(&scratch.pre) {
                *a = z.max(0.0);
            }
            &scratch.act
        }
    };
    let delta = &mut scratch.logits;
    head_logits(last, phi, delta);
    let loss = softmax_xent_in_place(delta, label);
    for v in delta.iter_mut() {
        *v *= coef;
    }

    let g_last = &mut grad[range];
    let m = phi.len();
    for (k, &pk) in phi.iter().enumerate() {
        if pk != 0.0 {
            linalg::axpy(pk, delta, &mut g_last[k * classes..(k + 1) * classes]);
        }
    }
    linalg::axpy(1.0, delta, &mut g_last[m * classes..]);

    if let (ModelKind::Mlp { hidden }, false) = (model.kind, last_only) {
        let d = model.input_dim;
        // back through W2 and the ReLU
        let delta_hidden = &mut scratch.delta_hidden;
        for k in 0..hidden {
            delta_hidden[k] = if scratch.pre[k] > 0.0 {
                linalg::dot(&last[k * classes..(k + 1) * classes], delta)
            } else {
                0.0
            };
        }
        let (g_w1, g_rest) = grad.split_at_mut(d * hidden);
        for (k, &xk) in x.iter().enumerate() {
            if xk != 0.0 {
                linalg::axpy(xk, delta_hidden, &mut g_w1[k * hidden..(k + 1) * hidden]);
            }
        }
        linalg::axpy(1.0, delta_hidden, &mut g_rest[..hidden]);
    }
    loss
}

struct Scratch {
    pre: Vec<f64>,
    act: Vec<f64>,
    logits: Vec<f64>,
    delta_hidden: Vec<f64>,
}

impl Scratch {
    fn new(model: &Model) -> Self {
        let hidden = match model.kind {
            ModelKind::Logistic => 0,
            ModelKind::Mlp { hidden } => hidden,
        };
        Self {
            pre: vec![0.0; hidden],
            act: vec![0.0; hidden],
            logits: vec![0.0; model.classes],
            delta_hidden: vec![0.0; hidden],
        }
    }
}

fn check_batch(model: &Model, x: &Matrix, labels: &[usize]) -> Result<()> {
    model.check_input(x)?;
    if labels.len() != x.rows() {
        return Err(Error::ShapeMismatch {
            context: "batch labels",
            expected: x.rows(),
            got: labels.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= model.classes) {
        return Err(Error::InvalidArgument(alloc::format!(
            "label {bad} outside model classes {}",
            model.classes
        )));
    }
    Ok(())
}

fn combined_loss_and_grad(
    model: &Model,
    x: &Matrix,
    labels: &[usize],
    coefs: impl Iterator<Item = f64>,
) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; model.params.len()];
    let mut scratch = Scratch::new(model);
    let mut loss = 0.0;
    for (i, coef) in coefs.enumerate() {
        let li = accumulate_sample(model, x.row(i), labels[i], coef, &mut grad, false, &mut scratch);
        loss += coef * li;
    }
    (loss, grad)
}

/// Weighted mean cross-entropy `Σ wᵢℓᵢ / Σ wᵢ` and its exact gradient.
pub fn loss_and_grad(
    model: &Model,
    x: &Matrix,
    labels: &[usize],
    weights: &[f64],
) -> Result<(f64, Vec<f64>)> {
    check_batch(model, x, labels)?;
    if weights.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            context: "sample weights",
            expected: labels.len(),
            got: weights.len(),
        });
    }
    if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidArgument("sample weights must be finite and >= 0".into()));
    }
    let total: f64 = weights.iter().sum();
    if total == 0.0 {
        return Err(Error::ZeroWeights);
    }
    Ok(combined_loss_and_grad(
        model,
        x,
        labels,
        weights.iter().map(|&w| w / total),
    ))
}

/// Unweighted mean cross-entropy and its gradient.
pub fn mean_loss_and_grad(model: &Model, x: &Matrix, labels: &[usize]) -> Result<(f64, Vec<f64>)> {
    check_batch(model, x, labels)?;
    if labels.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let n = labels.len() as f64;
    Ok(combined_loss_and_grad(
        model,
        x,
        labels,
        core::iter::repeat_n(1.0 / n, labels.len()),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMode {
    /// Final linear layer only (weights and bias).
    #[default]
    LastLayer,
    Full,
}

/// One per-sample loss gradient per row.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientMatrix {
    pub rows: Matrix,
    pub mode: GradientMode,
}

impl GradientMatrix {
    pub fn len(&self) -> usize {
        self.rows.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.rows.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.rows.row(i)
    }
}

/// Row `i` is `∇ℓᵢ`, restricted to the final layer in
/// [`GradientMode::LastLayer`].
pub fn per_sample_gradients(
    model: &Model,
    x: &Matrix,
    labels: &[usize],
    mode: GradientMode,
) -> Result<GradientMatrix> {
    check_batch(model, x, labels)?;
    if labels.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let n = labels.len();
    let mut scratch = Scratch::new(model);
    let rows = match mode {
        GradientMode::Full => {
            let p = model.params.len();
            let mut rows = Matrix::zeros(n, p);
            for i in 0..n {
                accumulate_sample(model, x.row(i), labels[i], 1.0, rows.row_mut(i), false, &mut scratch);
            }
            rows
        }
        GradientMode::LastLayer => {
            let range = model.last_layer_range();
            let mut full = vec![0.0; model.params.len()];
            let mut rows = Matrix::zeros(n, range.len());
            for i in 0..n {
                full[range.clone()].fill(0.0);
                accumulate_sample(model, x.row(i), labels[i], 1.0, &mut full, true, &mut scratch);
                rows.row_mut(i).copy_from_slice(&full[range.clone()]);
            }
            rows
        }
    };
    Ok(GradientMatrix { rows, mode })
}

/// Softmax cross-entropy on a fixed final-layer input, parametrised only by
/// the final layer. Serves GLISTER, whose inner updates touch the last layer.
#[derive(Debug, Clone)]
pub struct SoftmaxHead {
    train_features: Matrix,
    train_labels: Vec<usize>,
    val_features: Matrix,
    val_labels: Vec<usize>,
    classes: usize,
}

impl SoftmaxHead {
    pub fn new(
        model: &Model,
        train_x: &Matrix,
        train_labels: &[usize],
        val_x: &Matrix,
        val_labels: &[usize],
    ) -> Result<Self> {
        check_batch(model, train_x, train_labels)?;
        check_batch(model, val_x, val_labels)?;
        Ok(Self {
            train_features: model.head_features(train_x)?,
            train_labels: train_labels.to_vec(),
            val_features: if val_x.rows() == 0 {
                Matrix::zeros(0, model.head_input_dim())
            } else {
                model.head_features(val_x)?
            },
            val_labels: val_labels.to_vec(),
            classes: model.classes,
        })
    }

    pub fn param_len(&self) -> usize {
        (self.train_features.cols() + 1) * self.classes
    }

    fn sample_gradient(&self, params: &[f64], phi: &[f64], label: usize, coef: f64, out: &mut [f64]) -> f64 {
        let classes = self.classes;
        let mut delta = vec![0.0; classes];
        head_logits(params, phi, &mut delta);
        let loss = softmax_xent_in_place(&mut delta, label);
        for v in delta.iter_mut() {
            *v *= coef;
        }
        let m = phi.len();
        for (k, &pk) in phi.iter().enumerate() {
            linalg::axpy(pk, &delta, &mut out[k * classes..(k + 1) * classes]);
        }
        linalg::axpy(1.0, &delta, &mut out[m * classes..]);
        loss
    }

    /// Mean validation loss at `params`.
    pub fn validation_loss(&self, params: &[f64]) -> f64 {
        let n = self.val_labels.len() as f64;
        let mut logits = vec![0.0; self.classes];
        let mut total = 0.0;
        for (i, &y) in self.val_labels.iter().enumerate() {
            head_logits(params, self.val_features.row(i), &mut logits);
            total += softmax_xent_in_place(&mut logits, y);
        }
        total / n
    }
}

/// Supplies the gradients GLISTER needs: per-candidate training gradients
/// and the mean validation gradient, both at arbitrary parameters.
pub trait GradientProvider {
    fn param_len(&self) -> usize;
    fn validation_len(&self) -> usize;
    fn candidate_gradient(&self, params: &[f64], candidate: usize, out: &mut [f64]);
    fn validation_gradient(&self, params: &[f64], out: &mut [f64]);
}

impl GradientProvider for SoftmaxHead {
    fn param_len(&self) -> usize {
        SoftmaxHead::param_len(self)
    }

    fn validation_len(&self) -> usize {
        self.val_labels.len()
    }

    fn candidate_gradient(&self, params: &[f64], candidate: usize, out: &mut [f64]) {
        out.fill(0.0);
        self.sample_gradient(
            params,
            self.train_features.row(candidate),
            self.train_labels[candidate],
            1.0,
            out,
        );
    }

    fn validation_gradient(&self, params: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let coef = 1.0 / self.val_labels.len() as f64;
        for (i, &y) in self.val_labels.iter().enumerate() {
            self.sample_gradient(params, self.val_features.row(i), y, coef, out);
        }
    }
}

/// `base_lr · ½ · (1 + cos(π · epoch / total_epochs))`
pub fn cosine_lr(epoch: usize, total_epochs: usize, base_lr: f64) -> f64 {
    let t = epoch as f64 / total_epochs.max(1) as f64;
    base_lr * 0.5 * (1.0 + libm::cos(core::f64::consts::PI * t))
}

/// Rescales `grad` onto the `g_max` ball when its L2 norm exceeds `g_max`.
pub fn clip_global_norm(grad: &[f64], g_max: f64) -> Vec<f64> {
    let mut out = grad.to_vec();
    clip_in_place(&mut out, g_max);
    out
}

fn clip_in_place(grad: &mut [f64], g_max: f64) {
    let norm = linalg::norm2(grad);
    if norm > g_max {
        let scale = g_max / norm;
        for g in grad {
            *g *= scale;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    velocity: Vec<f64>,
    momentum: f64,
    base_lr: f64,
    clip_norm: f64,
}

impl OptimizerState {
    pub fn new(param_len: usize, momentum: f64, base_lr: f64, clip_norm: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::InvalidArgument("momentum must be in [0, 1)".into()));
        }
        if !(clip_norm > 0.0) {
            return Err(Error::InvalidArgument("clip norm must be > 0".into()));
        }
        if !(base_lr >= 0.0) || !base_lr.is_finite() {
            return Err(Error::InvalidArgument("base learning rate must be >= 0".into()));
        }
        Ok(Self {
            velocity: vec![0.0; param_len],
            momentum,
            base_lr,
            clip_norm,
        })
    }

    pub fn velocity(&self) -> &[f64] {
        &self.velocity
    }

    pub fn base_lr(&self) -> f64 {
        self.base_lr
    }

    /// `v ← βv + clip(g)`, `θ ← θ − lr·v`.
    pub fn step(&mut self, model: &mut Model, grad: &[f64], lr: f64) -> Result<()> {
        if grad.len() != model.params.len() || self.velocity.len() != grad.len() {
            return Err(Error::ShapeMismatch {
                context: "optimizer step",
                expected: model.params.len(),
                got: grad.len(),
            });
        }
        let mut clipped = grad.to_vec();
        clip_in_place(&mut clipped, self.clip_norm);
        for ((v, g), theta) in self.velocity.iter_mut().zip(&clipped).zip(&mut model.params) {
            *v = self.momentum * *v + g;
            *theta -= lr * *v;
        }
        Ok(())
    }
}

/// Free-function form of [`OptimizerState::step`].
pub fn sgd_step(state: &mut OptimizerState, model: &mut Model, grad: &[f64], lr: f64) -> Result<()> {
    state.step(model, grad, lr)
}
