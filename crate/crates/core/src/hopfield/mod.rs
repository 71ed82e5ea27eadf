//! Learned similarity retrieval over past time steps.
//!
//! Each step's raw features go through a two-layer ReLU encoder, get a
//! relative-time channel appended, and are projected into query and key
//! spaces. The association of a query with the stored keys is
//! `softmax(beta * <W_q e_q, W_k e_k>)`. Training fits the encoder so that
//! the association, applied to the absolute errors of the other steps,
//! reconstructs each step's own absolute error.

mod adamw;
mod backward;
mod retrieval;
mod select;
mod train;

use alloc::vec::Vec;

use rand::Rng;

use crate::data::{Matrix, WeightVector};
use crate::error::{check_len, invalid, Error, Result};
use crate::rng::rng_from_seed;

pub use adamw::AdamW;
pub use backward::{backward, forward_loss, loss_and_gradient};
pub use retrieval::EncodedMemory;
pub use select::{select_model, ValidationScore};
pub use train::{train, validation_score, CalibrationSegment, TracePoint, TrainConfig, TrainOutcome};

pub type Vector = nalgebra::DVector<f64>;

/// Layer widths of the encoder and projections.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelShape {
    pub input: usize,
    pub hidden: usize,
    pub encoding: usize,
    pub attention: usize,
}

impl ModelShape {
    pub fn new(input: usize, hidden: usize, encoding: usize, attention: usize) -> Self {
        Self { input, hidden, encoding, attention }
    }

    /// 64 hidden units, 16-wide encoding and projections.
    pub fn with_defaults(input: usize) -> Self {
        Self::new(input, 64, 16, 16)
    }
}

/// Trainable tensors. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    /// hidden x input
    pub w1: Matrix,
    pub b1: Vector,
    /// encoding x hidden
    pub w2: Matrix,
    pub b2: Vector,
    /// attention x (encoding + 1); the last column weighs the time channel.
    pub wq: Matrix,
    pub wk: Matrix,
}

impl Params {
    pub fn zeros(shape: ModelShape) -> Self {
        let ModelShape { input, hidden, encoding, attention } = shape;
        Self {
            w1: Matrix::zeros(hidden, input),
            b1: Vector::zeros(hidden),
            w2: Matrix::zeros(encoding, hidden),
            b2: Vector::zeros(encoding),
            wq: Matrix::zeros(attention, encoding + 1),
            wk: Matrix::zeros(attention, encoding + 1),
        }
    }

    /// Uniform fan-in initialization, `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn init(shape: ModelShape, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let mut p = Self::zeros(shape);
        let fans = [shape.input, shape.input, shape.hidden, shape.hidden, shape.encoding + 1, shape.encoding + 1];
        for (t, fan) in p.tensors_mut().into_iter().zip(fans) {
            let bound = 1.0 / libm::sqrt(fan.max(1) as f64);
            for v in t.iter_mut() {
                *v = rng.random_range(-bound..bound);
            }
        }
        p
    }

    pub fn shape(&self) -> ModelShape {
        ModelShape::new(self.w1.ncols(), self.w1.nrows(), self.w2.nrows(), self.wq.nrows())
    }

    pub fn tensors(&self) -> [&[f64]; 6] {
        [
            self.w1.as_slice(),
            self.b1.as_slice(),
            self.w2.as_slice(),
            self.b2.as_slice(),
            self.wq.as_slice(),
            self.wk.as_slice(),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 6] {
        [
            self.w1.as_mut_slice(),
            self.b1.as_mut_slice(),
            self.w2.as_mut_slice(),
            self.b2.as_mut_slice(),
            self.wq.as_mut_slice(),
            self.wk.as_mut_slice(),
        ]
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// All parameters concatenated in tensor order (column-major within a tensor).
    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().iter().flat_map(|t| t.iter().copied()).collect()
    }

    pub fn set_flat(&mut self, index: usize, value: f64) {
        let mut i = index;
        for t in self.tensors_mut() {
            if i < t.len() {
                t[i] = value;
                return;
            }
            i -= t.len();
        }
        panic!("parameter index {index} out of range");
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn norm_sq(&self) -> f64 {
        self.tensors().iter().flat_map(|t| t.iter()).map(|v| v * v).sum()
    }

    pub(crate) fn add_scaled(&mut self, other: &Self, scale: f64) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }
}

/// Encoder, projections and retrieval temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct HopfieldModel {
    pub params: Params,
    pub beta: f64,
    pub dropout_rate: f64,
    /// When off the time channel is fed as zero; parameter shapes are unchanged.
    pub use_time_encoding: bool,
}

impl HopfieldModel {
    pub fn new(params: Params, beta: f64, dropout_rate: f64, use_time_encoding: bool) -> Result<Self> {
        let m = Self { params, beta, dropout_rate, use_time_encoding };
        m.validate()?;
        Ok(m)
    }

    /// Fresh model with `beta = 1/sqrt(attention width)`.
    pub fn initialize(shape: ModelShape, dropout_rate: f64, use_time_encoding: bool, seed: u64) -> Result<Self> {
        let beta = 1.0 / libm::sqrt(shape.attention as f64);
        Self::new(Params::init(shape, seed), beta, dropout_rate, use_time_encoding)
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.params.shape();
        let p = &self.params;
        let consistent = p.b1.len() == s.hidden
            && p.w2.ncols() == s.hidden
            && p.b2.len() == s.encoding
            && p.wq.ncols() == s.encoding + 1
            && p.wk.shape() == p.wq.shape();
        if !consistent {
            return Err(invalid("inconsistent parameter shapes"));
        }
        if !p.is_finite() {
            return Err(invalid("non-finite parameters"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(invalid("beta must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(invalid("dropout rate must be in [0,1)"));
        }
        Ok(())
    }

    pub fn shape(&self) -> ModelShape {
        self.params.shape()
    }

    /// Time channel values `timestamp / total` (zero when disabled).
    pub fn time_channel(&self, timestamps: &[f64], total: f64) -> Vec<f64> {
        if self.use_time_encoding {
            timestamps.iter().map(|t| t / total).collect()
        } else {
            alloc::vec![0.0; timestamps.len()]
        }
    }
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct EncoderPass {
    pub pre: Matrix,
    pub mask: Option<Matrix>,
    pub hidden: Matrix,
    pub encoded: Matrix,
}

pub(crate) fn dropout_mask(rows: usize, cols: usize, rate: f64, seed: u64) -> Option<Matrix> {
    if rate <= 0.0 {
        return None;
    }
    let mut rng = rng_from_seed(seed);
    let keep = 1.0 / (1.0 - rate);
    // Row-major draw order so the mask does not depend on storage layout.
    let mut m = Matrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = if rng.random::<f64>() < rate { 0.0 } else { keep };
        }
    }
    Some(m)
}

pub(crate) fn encoder_pass(
    model: &HopfieldModel,
    features: &Matrix,
    time: &[f64],
    mask: Option<Matrix>,
) -> EncoderPass {
    let p = &model.params;
    let t = features.nrows();
    let mut pre = features * p.w1.transpose();
    for mut row in pre.row_iter_mut() {
        row += p.b1.transpose();
    }
    let mut hidden = pre.map(|v| v.max(0.0));
    if let Some(m) = &mask {
        hidden.component_mul_assign(m);
    }
    let enc_width = p.w2.nrows();
    let mut encoded = Matrix::zeros(t, enc_width + 1);
    let mut body = &hidden * p.w2.transpose();
    for mut row in body.row_iter_mut() {
        row += p.b2.transpose();
    }
    encoded.columns_mut(0, enc_width).copy_from(&body);
    for (i, tv) in time.iter().enumerate() {
        encoded[(i, enc_width)] = *tv;
    }
    EncoderPass { pre, mask, hidden, encoded }
}

/// Encodes every row as `[mlp(z_t) | t / total]`.
///
/// With `training` set, dropout with the model's rate is applied to the
/// hidden layer using a mask drawn from `seed`.
pub fn encode(
    model: &HopfieldModel,
    features: &Matrix,
    timestamps: &[f64],
    total: f64,
    training: bool,
    seed: u64,
) -> Result<Matrix> {
    check_len(model.shape().input, features.ncols())?;
    check_len(features.nrows(), timestamps.len())?;
    if !(total > 0.0) {
        return Err(invalid("time normalizer must be positive"));
    }
    let time = model.time_channel(timestamps, total);
    let mask =
        if training { dropout_mask(features.nrows(), model.shape().hidden, model.dropout_rate, seed) } else { None };
    Ok(encoder_pass(model, features, &time, mask).encoded)
}

/// Row-stochastic association of queries with keys.
#[derive(Debug, Clone, PartialEq)]
pub struct AssociationMatrix(Matrix);

impl AssociationMatrix {
    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn row_weights(&self, i: usize) -> Result<WeightVector> {
        WeightVector::new(self.0.row(i).iter().copied().collect())
    }

    /// Wraps an arbitrary matrix, checking nonnegativity and unit row sums.
    pub fn from_matrix(a: Matrix) -> Result<Self> {
        for row in a.row_iter() {
            if row.iter().any(|v| !(*v >= 0.0 && *v <= 1.0)) || (row.sum() - 1.0).abs() > 1e-6 {
                return Err(invalid("association rows must be probability vectors"));
            }
        }
        Ok(Self(a))
    }
}

/// Masked row softmax of a logit matrix; masked entries get exactly zero.
pub(crate) fn masked_softmax(logits: &Matrix, mask_self: bool) -> Matrix {
    let mut a = logits.clone();
    for i in 0..a.nrows() {
        let mut max = f64::NEG_INFINITY;
        for j in 0..a.ncols() {
            if !(mask_self && i == j) {
                max = max.max(a[(i, j)]);
            }
        }
        let mut sum = 0.0;
        for j in 0..a.ncols() {
            let e = if mask_self && i == j { 0.0 } else { libm::exp(a[(i, j)] - max) };
            a[(i, j)] = e;
            sum += e;
        }
        for j in 0..a.ncols() {
            a[(i, j)] /= sum;
        }
    }
    a
}

pub(crate) fn association_logits(model: &HopfieldModel, queries: &Matrix, keys: &Matrix) -> (Matrix, Matrix, Matrix) {
    let q = queries * model.params.wq.transpose();
    let k = keys * model.params.wk.transpose();
    let s = (&q * k.transpose()) * model.beta;
    (q, k, s)
}

/// `softmax(beta * (W_q q)^T (W_k k))` over the key axis for every query row
/// of already-encoded patterns. `mask_self` zeroes entry `(i, i)`.
pub fn associate(model: &HopfieldModel, queries: &Matrix, keys: &Matrix, mask_self: bool) -> Result<AssociationMatrix> {
    let width = model.shape().encoding + 1;
    check_len(width, queries.ncols())?;
    check_len(width, keys.ncols())?;
    if keys.nrows() == 0 {
        return Err(Error::Empty("association needs at least one key"));
    }
    if mask_self {
        check_len(queries.nrows(), keys.nrows())?;
        if keys.nrows() < 2 {
            return Err(Error::Empty("masked association needs at least two keys"));
        }
    }
    let (_, _, s) = association_logits(model, queries, keys);
    Ok(AssociationMatrix(masked_softmax(&s, mask_self)))
}

/// Mean squared error of reconstructing `|e_t|` from `sum_j A_tj |e_j|`.
pub fn training_loss(assoc: &AssociationMatrix, abs_errors: &[f64]) -> Result<f64> {
    let a = assoc.matrix();
    check_len(a.ncols(), abs_errors.len())?;
    check_len(a.nrows(), abs_errors.len())?;
    let t = abs_errors.len() as f64;
    let sum: f64 = a
        .row_iter()
        .zip(abs_errors)
        .map(|(row, v)| {
            let pred: f64 = row.iter().zip(abs_errors).map(|(w, e)| w * e).sum();
            (v - pred) * (v - pred)
        })
        .sum();
    Ok(sum / t)
}
