//! Base point predictor (closed-form ridge) and the two-regime synthetic
//! series generator.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::data::{Matrix, TimeSeriesDataset};
use crate::error::{check_len, invalid, Error, Result};
use crate::rng::rng_from_seed;

/// Linear model `y = x . coefficients + intercept` fitted with an L2 penalty
/// on the coefficients only.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
}

/// Solves `(Xc^T Xc + lambda I) w = Xc^T yc` on column-centered data via
/// Cholesky; the intercept absorbs the means.
pub fn ridge_fit(features: &Matrix, targets: &[f64], lambda: f64) -> Result<RidgeModel> {
    let (n, m) = features.shape();
    check_len(n, targets.len())?;
    if n == 0 || m == 0 {
        return Err(Error::Empty("ridge design matrix"));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(invalid("lambda must be finite and nonnegative"));
    }
    let x_mean = features.row_mean();
    let y_mean = targets.iter().sum::<f64>() / n as f64;
    let mut xc = features.clone();
    for mut row in xc.row_iter_mut() {
        row -= &x_mean;
    }
    let yc = nalgebra::DVector::from_iterator(n, targets.iter().map(|y| y - y_mean));

    let mut gram = xc.tr_mul(&xc);
    for i in 0..m {
        gram[(i, i)] += lambda;
    }
    let rhs = xc.tr_mul(&yc);
    let w = gram.cholesky().ok_or(Error::Singular)?.solve(&rhs);
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular);
    }
    let intercept = y_mean - x_mean.iter().zip(w.iter()).map(|(a, b)| a * b).sum::<f64>();
    Ok(RidgeModel { coefficients: w.iter().copied().collect(), intercept, lambda })
}

pub fn ridge_predict(model: &RidgeModel, features: &Matrix) -> Result<Vec<f64>> {
    check_len(model.coefficients.len(), features.ncols())?;
    Ok(features
        .row_iter()
        .map(|row| row.iter().zip(&model.coefficients).map(|(x, w)| x * w).sum::<f64>() + model.intercept)
        .collect())
}

/// Which noise law generated a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `x = x_low`, Gaussian noise with standard deviation `x / 2`.
    Low,
    /// `x = x_high`, uniform noise on `[-x, x]`.
    High,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeSeriesConfig {
    pub total_steps: usize,
    pub x_low: f64,
    pub x_high: f64,
    pub regime_len_min: usize,
    pub regime_len_max: usize,
    pub base_level: f64,
    pub seed: u64,
}

impl Default for RegimeSeriesConfig {
    fn default() -> Self {
        Self {
            total_steps: 1000,
            x_low: 3.0,
            x_high: 21.0,
            regime_len_min: 1,
            regime_len_max: 25,
            base_level: 10.0,
            seed: 0,
        }
    }
}

impl RegimeSeriesConfig {
    pub fn validate(&self) -> Result<()> {
        if self.total_steps < 3 {
            return Err(invalid("total_steps must be at least 3"));
        }
        if self.regime_len_min < 1 || self.regime_len_max < self.regime_len_min {
            return Err(invalid("regime lengths must satisfy 1 <= min <= max"));
        }
        if !(self.x_low > 0.0 && self.x_high > 0.0) {
            return Err(invalid("regime feature levels must be positive"));
        }
        Ok(())
    }
}

/// Synthetic series before a base model has produced predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeSeries {
    pub features: Matrix,
    pub targets: Vec<f64>,
    pub timestamps: Vec<i64>,
    pub regimes: Vec<Regime>,
}

impl RegimeSeries {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn into_dataset(self, predictions: Vec<f64>) -> Result<TimeSeriesDataset> {
        TimeSeriesDataset::new(self.features, self.targets, predictions, self.timestamps)
    }
}

/// Alternating low/high regimes with lengths drawn uniformly from
/// `[regime_len_min, regime_len_max]`. Starts in the low regime; the last
/// regime is truncated to `total_steps`.
pub fn generate_regime_series(config: &RegimeSeriesConfig) -> Result<RegimeSeries> {
    config.validate()?;
    let mut rng = rng_from_seed(config.seed);
    let low_noise = Normal::new(0.0, config.x_low / 2.0).map_err(|e| invalid(alloc::format!("{e}")))?;
    let high_noise =
        Uniform::new_inclusive(-config.x_high, config.x_high).map_err(|e| invalid(alloc::format!("{e}")))?;

    let n = config.total_steps;
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    let mut regimes = Vec::with_capacity(n);
    let mut regime = Regime::Low;
    while xs.len() < n {
        let len = rng.random_range(config.regime_len_min..=config.regime_len_max);
        for _ in 0..len.min(n - xs.len()) {
            let (x, noise) = match regime {
                Regime::Low => (config.x_low, low_noise.sample(&mut rng)),
                Regime::High => (config.x_high, high_noise.sample(&mut rng)),
            };
            xs.push(x);
            ys.push(config.base_level + x + noise);
            regimes.push(regime);
        }
        regime = match regime {
            Regime::Low => Regime::High,
            Regime::High => Regime::Low,
        };
    }
    Ok(RegimeSeries { features: Matrix::from_vec(n, 1, xs), targets: ys, timestamps: (0..n as i64).collect(), regimes })
}
