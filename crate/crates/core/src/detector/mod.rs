//! From-scratch MLP and GRU binary classifiers over 48-slot SoC rows.
//!
//! Both networks classify a day of reported SoC values as honest or lying.
//! Output index 0 is the lying probability, index 1 the honest probability.
//! Training is mini-batch SGD (optionally with momentum or Adam) with
//! exact analytic gradients: plain backprop for the MLP and full
//! backpropagation through time for the GRU. All arithmetic is f64.

mod checkpoint;
mod gru;
mod mlp;
mod train;

pub use checkpoint::{load_model, save_model};
pub use gru::{Gru, GruGrads, GruLayer, GruLayerGrads};
pub use mlp::{DenseGrad, DenseLayer, Mlp, MlpGrads};
pub use train::{sgd_step, train, EpochStats, OptimizerState, TrainReport};

use rand::Rng;
use thiserror::Error;

use crate::dataset::Label;

/// Input width: one feature per half-hour reporting slot.
pub const INPUT_WIDTH: usize = 48;

/// Output width: (lying, honest).
pub const OUTPUT_WIDTH: usize = 2;

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("expected input width {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
    #[error("training diverged (loss is NaN) at epoch {epoch}")]
    Diverged { epoch: u32 },
    #[error("batch must be non-empty")]
    EmptyBatch,
    #[error("{0} set must be non-empty")]
    EmptySet(&'static str),
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Dense row-major matrix, the only linear-algebra type the networks use.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend(row);
        }
        Matrix { rows: r, cols: c, data }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// out = A * x.
    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (r, o) in out.iter_mut().enumerate() {
            let row = self.row(r);
            let mut acc = 0.0;
            for (w, xi) in row.iter().zip(x) {
                acc += w * xi;
            }
            *o = acc;
        }
    }

    /// out += A^T * x.
    pub fn matvec_transpose_add(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (r, &xr) in x.iter().enumerate() {
            if xr == 0.0 {
                continue;
            }
            let row = self.row(r);
            for (o, w) in out.iter_mut().zip(row) {
                *o += w * xr;
            }
        }
    }

    /// A += u * v^T.
    pub fn add_outer(&mut self, u: &[f64], v: &[f64]) {
        debug_assert_eq!(u.len(), self.rows);
        debug_assert_eq!(v.len(), self.cols);
        for (r, &ur) in u.iter().enumerate() {
            if ur == 0.0 {
                continue;
            }
            let row = self.row_mut(r);
            for (w, vi) in row.iter_mut().zip(v) {
                *w += ur * vi;
            }
        }
    }
}

/// Hidden-layer activation functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Sigmoid,
    Tanh,
    Relu,
    Softsign,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Softsign => x / (1.0 + x.abs()),
        }
    }

    /// Derivative expressed in terms of the activation output.
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Softsign => {
                let d = 1.0 - y.abs();
                d * d
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Softsign => "softsign",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "sigmoid" => Some(Activation::Sigmoid),
            "tanh" => Some(Activation::Tanh),
            "relu" => Some(Activation::Relu),
            "softsign" => Some(Activation::Softsign),
            _ => None,
        }
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Training loss functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Loss {
    CrossEntropy,
    MeanSquaredError,
}

impl Loss {
    /// Loss value and gradient with respect to the softmax logits.
    pub fn value_and_logit_grad(self, probs: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
        match self {
            Loss::CrossEntropy => {
                let value = -probs
                    .iter()
                    .zip(target)
                    .map(|(&p, &y)| y * p.max(1e-300).ln())
                    .sum::<f64>();
                let grad = probs.iter().zip(target).map(|(&p, &y)| p - y).collect();
                (value, grad)
            }
            Loss::MeanSquaredError => {
                let value = 0.5
                    * probs
                        .iter()
                        .zip(target)
                        .map(|(&p, &y)| (p - y) * (p - y))
                        .sum::<f64>();
                // Chain through the softmax Jacobian diag(p) - p p^T.
                let diff: Vec<f64> = probs.iter().zip(target).map(|(&p, &y)| p - y).collect();
                let dot: f64 = diff.iter().zip(probs).map(|(&d, &p)| d * p).sum();
                let grad = probs
                    .iter()
                    .zip(&diff)
                    .map(|(&p, &d)| p * (d - dot))
                    .collect();
                (value, grad)
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Loss::CrossEntropy => "cross_entropy",
            Loss::MeanSquaredError => "mean_squared_error",
        }
    }
}

/// Parameter initialization schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InitKind {
    /// Uniform on [-0.05, 0.05].
    Uniform,
    /// Normal with sigma 0.05.
    Normal,
    /// Glorot uniform, fan-based.
    Glorot,
}

impl InitKind {
    pub fn name(self) -> &'static str {
        match self {
            InitKind::Uniform => "uniform",
            InitKind::Normal => "normal",
            InitKind::Glorot => "glorot",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "uniform" => Some(InitKind::Uniform),
            "normal" => Some(InitKind::Normal),
            "glorot" => Some(InitKind::Glorot),
            _ => None,
        }
    }

    pub(crate) fn fill(self, m: &mut Matrix, rng: &mut impl Rng) {
        let (fan_out, fan_in) = (m.rows as f64, m.cols as f64);
        for w in &mut m.data {
            *w = match self {
                InitKind::Uniform => rng.gen_range(-0.05..=0.05),
                InitKind::Normal => 0.05 * standard_normal(rng),
                InitKind::Glorot => {
                    let bound = (6.0 / (fan_in + fan_out)).sqrt();
                    rng.gen_range(-bound..=bound)
                }
            };
        }
    }
}

/// Box-Muller standard normal draw.
fn standard_normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Optimizer variants for the SGD step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OptimizerKind {
    Sgd,
    Momentum,
    Adam,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Momentum => "momentum",
            OptimizerKind::Adam => "adam",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "sgd" => Some(OptimizerKind::Sgd),
            "momentum" => Some(OptimizerKind::Momentum),
            "adam" => Some(OptimizerKind::Adam),
            _ => None,
        }
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: u32,
    pub loss: Loss,
    /// Dropout rate on hidden activations, [0, 0.9].
    pub dropout_rate: f64,
    /// Max-norm constraint on each neuron's incoming weight row.
    pub max_norm: f64,
    pub init: InitKind,
    pub optimizer: OptimizerKind,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            batch_size: 32,
            epochs: 15,
            loss: Loss::CrossEntropy,
            dropout_rate: 0.0,
            max_norm: 3.0,
            init: InitKind::Glorot,
            optimizer: OptimizerKind::Adam,
            seed: 0,
        }
    }
}

/// Classifier output: probabilities summing to one, index 0 = lying.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub probs: [f64; OUTPUT_WIDTH],
}

impl Prediction {
    /// Argmax label; exact ties go to honest.
    pub fn label(&self) -> Label {
        if self.probs[0] > self.probs[1] {
            Label::Lying
        } else {
            Label::Honest
        }
    }

    /// Probability assigned to the lying class.
    pub fn lying_score(&self) -> f64 {
        self.probs[0]
    }
}

/// One-hot target for a label: lying = (1, 0), honest = (0, 1).
pub fn one_hot(label: Label) -> [f64; OUTPUT_WIDTH] {
    match label {
        Label::Lying => [1.0, 0.0],
        Label::Honest => [0.0, 1.0],
    }
}

/// Model architecture description, the shape half of a chromosome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ArchSpec {
    pub kind: ModelKind,
    pub hidden_layers: usize,
    pub width: usize,
    pub hidden_activation: Activation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Mlp,
    Gru,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Mlp => "mlp",
            ModelKind::Gru => "gru",
        }
    }
}

/// A trained (or initial) detector of either architecture.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Mlp(Mlp),
    Gru(Gru),
}

/// Gradients matching a [`Model`]'s parameter layout.
#[derive(Debug, Clone)]
pub enum Gradients {
    Mlp(MlpGrads),
    Gru(GruGrads),
}

impl Model {
    /// Builds a freshly initialized model.
    pub fn build(arch: &ArchSpec, init: InitKind, seed: u64) -> Model {
        match arch.kind {
            ModelKind::Mlp => Model::Mlp(Mlp::new(arch, init, seed)),
            ModelKind::Gru => Model::Gru(Gru::new(arch, init, seed)),
        }
    }

    /// Inference forward pass (dropout off).
    pub fn predict(&self, features: &[f64]) -> Result<Prediction, DetectorError> {
        match self {
            Model::Mlp(m) => m.forward(features),
            Model::Gru(g) => g.forward(features),
        }
    }

    /// Training forward pass with dropout driven by `mask_seed`.
    pub fn forward_train(
        &self,
        features: &[f64],
        dropout_rate: f64,
        mask_seed: u64,
    ) -> Result<Prediction, DetectorError> {
        match self {
            Model::Mlp(m) => Ok(m.forward_cached(features, dropout_rate, mask_seed)?.prediction()),
            Model::Gru(g) => Ok(g.forward_cached(features, dropout_rate, mask_seed)?.prediction()),
        }
    }

    /// Mean loss and mean gradients over a batch of rows.
    pub fn loss_and_gradients(
        &self,
        batch: &[(&[f64], Label)],
        config: &TrainConfig,
        dropout_seed: u64,
    ) -> Result<(f64, Gradients), DetectorError> {
        if batch.is_empty() {
            return Err(DetectorError::EmptyBatch);
        }
        match self {
            Model::Mlp(m) => {
                let (loss, grads) = m.batch_gradients(batch, config, dropout_seed)?;
                Ok((loss, Gradients::Mlp(grads)))
            }
            Model::Gru(g) => {
                let (loss, grads) = g.batch_gradients(batch, config, dropout_seed)?;
                Ok((loss, Gradients::Gru(grads)))
            }
        }
    }

    pub fn param_count(&self) -> usize {
        let mut n = 0;
        let mut probe = self.clone();
        probe.for_each_param_mut(|_, _| n += 1);
        n
    }

    /// Visits every parameter in a fixed traversal order.
    pub fn for_each_param_mut(&mut self, mut f: impl FnMut(usize, &mut f64)) {
        let mut idx = 0;
        match self {
            Model::Mlp(m) => m.visit_params_mut(&mut |w| {
                f(idx, w);
                idx += 1;
            }),
            Model::Gru(g) => g.visit_params_mut(&mut |w| {
                f(idx, w);
                idx += 1;
            }),
        }
    }

    /// Walks parameters and their gradients in lockstep.
    pub fn zip_params_mut(&mut self, grads: &Gradients, mut f: impl FnMut(usize, &mut f64, f64)) {
        let mut idx = 0;
        match (self, grads) {
            (Model::Mlp(m), Gradients::Mlp(g)) => {
                let mut gs = Vec::new();
                g.visit(&mut |v| gs.push(v));
                m.visit_params_mut(&mut |w| {
                    f(idx, w, gs[idx]);
                    idx += 1;
                });
            }
            (Model::Gru(m), Gradients::Gru(g)) => {
                let mut gs = Vec::new();
                g.visit(&mut |v| gs.push(v));
                m.visit_params_mut(&mut |w| {
                    f(idx, w, gs[idx]);
                    idx += 1;
                });
            }
            _ => panic!("model/gradient kind mismatch"),
        }
    }

    /// Visits each weight-matrix row (a neuron's incoming weights).
    pub fn for_each_weight_row_mut(&mut self, mut f: impl FnMut(&mut [f64])) {
        match self {
            Model::Mlp(m) => m.visit_weight_rows_mut(&mut f),
            Model::Gru(g) => g.visit_weight_rows_mut(&mut f),
        }
    }
}
