//! Full-batch training with periodic validation and checkpoint selection.
//!
//! Each calibration segment is split in half. The first half is the
//! training set for the self-association loss; the second half is
//! validation. At each validation point every validation step retrieves
//! over the training half plus the validation steps already seen, and the
//! resulting weighted-ECDF intervals are scored for coverage gap and width.

use alloc::vec::Vec;

use super::{
    loss_and_gradient, select_model, AdamW, EncodedMemory, HopfieldModel, ModelShape, Params, ValidationScore,
};
use crate::data::Matrix;
use crate::error::{check_len, invalid, Error, Result};
use crate::quantile::{weighted_quantile_ecdf, QuantileLevel};
use crate::rng::{derive_seed, label};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub validate_every: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    pub use_time_encoding: bool,
    pub adamw_beta1: f64,
    pub adamw_beta2: f64,
    pub weight_decay: f64,
    /// Number of series per optimizer step.
    pub batch_size: usize,
    pub seed: u64,
    /// Miscoverage used to score validation intervals.
    pub alpha: f64,
    pub hidden: usize,
    pub encoding: usize,
    pub attention: usize,
    /// Softmax temperature; `None` means `1/sqrt(attention)`.
    pub beta: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 3000,
            validate_every: 5,
            learning_rate: 0.001,
            dropout: 0.0,
            use_time_encoding: true,
            adamw_beta1: 0.9,
            adamw_beta2: 0.999,
            weight_decay: 0.01,
            batch_size: 1,
            seed: 0,
            alpha: 0.1,
            hidden: 64,
            encoding: 16,
            attention: 16,
            beta: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.validate_every == 0 || self.batch_size == 0 {
            return Err(invalid("epochs, validate_every and batch_size must be at least 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(invalid("learning rate must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid("alpha must be in (0,1)"));
        }
        if self.hidden == 0 || self.encoding == 0 || self.attention == 0 {
            return Err(invalid("layer widths must be positive"));
        }
        Ok(())
    }
}

/// Calibration features and signed errors of one series.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSegment {
    pub features: Matrix,
    pub errors: Vec<f64>,
}

impl CalibrationSegment {
    pub fn new(features: Matrix, errors: Vec<f64>) -> Result<Self> {
        check_len(features.nrows(), errors.len())?;
        if errors.len() < 8 {
            return Err(invalid("calibration segment needs at least 8 steps"));
        }
        Ok(Self { features, errors })
    }

    /// Number of leading steps used as training data.
    pub fn train_len(&self) -> usize {
        self.errors.len() / 2
    }

    fn train_inputs(&self) -> (Matrix, Vec<f64>, Vec<f64>) {
        let n = self.train_len();
        let x = self.features.rows(0, n).into_owned();
        let ts = (1..=n).map(|t| t as f64).collect();
        let abs = self.errors[..n].iter().map(|e| e.abs()).collect();
        (x, ts, abs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub epoch: usize,
    pub train_loss: f64,
    pub score: ValidationScore,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// The selected checkpoint.
    pub model: HopfieldModel,
    pub trace: Vec<TracePoint>,
    /// Index into `trace` of the selected checkpoint.
    pub selected: usize,
    /// Dropout-free training loss before the first update.
    pub initial_loss: f64,
    /// Dropout-free training loss of the selected checkpoint.
    pub final_loss: f64,
}

/// Mean dropout-free training loss over all segments.
pub fn training_set_loss(model: &HopfieldModel, segments: &[CalibrationSegment]) -> Result<f64> {
    let mut total = 0.0;
    for s in segments {
        let (x, ts, abs) = s.train_inputs();
        total += super::forward_loss(model, &x, &ts, ts.len() as f64, &abs, None)?;
    }
    Ok(total / segments.len() as f64)
}

/// Coverage gap and mean width of weighted-ECDF intervals on the validation
/// halves.
pub fn validation_score(model: &HopfieldModel, segments: &[CalibrationSegment], alpha: f64) -> Result<ValidationScore> {
    let lo = QuantileLevel::new(alpha / 2.0)?;
    let hi = QuantileLevel::new(1.0 - alpha / 2.0)?;
    let (mut misses, mut count, mut width) = (0usize, 0usize, 0.0);
    for s in segments {
        let memory = EncodedMemory::new(model, &s.features)?;
        for j in s.train_len()..s.errors.len() {
            let w = memory.weights(j, 0..j)?;
            let past = &s.errors[..j];
            let lower = weighted_quantile_ecdf(past, &w, lo)?;
            let upper = weighted_quantile_ecdf(past, &w, hi)?;
            if !(lower <= s.errors[j] && s.errors[j] <= upper) {
                misses += 1;
            }
            count += 1;
            width += upper - lower;
        }
    }
    Ok(ValidationScore::new(alpha - misses as f64 / count as f64, width / count as f64))
}

/// Trains a model with AdamW on the self-association loss and returns the
/// checkpoint chosen by [`select_model`] over the validation trace.
pub fn train(segments: &[CalibrationSegment], config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let first = segments.first().ok_or(Error::Empty("no training series"))?;
    let input = first.features.ncols();
    if segments.iter().any(|s| s.features.ncols() != input) {
        return Err(invalid("all series must share the feature width"));
    }
    let shape = ModelShape::new(input, config.hidden, config.encoding, config.attention);
    let mut model = HopfieldModel::initialize(
        shape,
        config.dropout,
        config.use_time_encoding,
        derive_seed(config.seed, &[label("init")]),
    )?;
    if let Some(beta) = config.beta {
        model.beta = beta;
        model.validate()?;
    }
    let inputs: Vec<_> = segments.iter().map(CalibrationSegment::train_inputs).collect();
    let initial_loss = training_set_loss(&model, segments)?;
    let mut opt =
        AdamW::new(&model.params, config.learning_rate, config.adamw_beta1, config.adamw_beta2, config.weight_decay);

    let mut trace = Vec::new();
    let mut checkpoints: Vec<Params> = Vec::new();
    for epoch in 1..=config.epochs {
        let mut epoch_loss = 0.0;
        for (b, batch) in inputs.chunks(config.batch_size).enumerate() {
            let mut grads = Params::zeros(shape);
            let mut batch_loss = 0.0;
            for (i, (x, ts, abs)) in batch.iter().enumerate() {
                let series = (b * config.batch_size + i) as u64;
                let seed = derive_seed(config.seed, &[label("dropout"), epoch as u64, series]);
                let (loss, g) = loss_and_gradient(&model, x, ts, ts.len() as f64, abs, Some(seed))?;
                batch_loss += loss;
                grads.add_scaled(&g, 1.0 / batch.len() as f64);
            }
            if !batch_loss.is_finite() || !grads.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            epoch_loss += batch_loss;
            opt.step(&mut model.params, &grads);
        }
        if !model.params.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        if epoch % config.validate_every == 0 || epoch == config.epochs {
            let score = validation_score(&model, segments, config.alpha)?;
            trace.push(TracePoint { epoch, train_loss: epoch_loss / inputs.len() as f64, score });
            checkpoints.push(model.params.clone());
        }
    }
    let scores: Vec<_> = trace.iter().map(|t| t.score).collect();
    let selected = select_model(&scores)?;
    model.params = checkpoints.swap_remove(selected);
    let final_loss = training_set_loss(&model, segments)?;
    Ok(TrainOutcome { model, trace, selected, initial_loss, final_loss })
}
