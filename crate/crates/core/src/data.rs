//! Shared data model: datasets, splits, intervals and weight vectors.

use alloc::format;
use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{check_len, invalid, Error, Result};

/// Dense row-major-by-convention matrix; rows are time steps.
pub type Matrix = nalgebra::DMatrix<f64>;

/// One aligned series: features, targets, base-model predictions and errors.
///
/// Immutable after construction. `errors[i]` is always exactly
/// `targets[i] - predictions[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesDataset {
    features: Matrix,
    targets: Vec<f64>,
    predictions: Vec<f64>,
    errors: Vec<f64>,
    timestamps: Vec<i64>,
}

impl TimeSeriesDataset {
    pub fn new(features: Matrix, targets: Vec<f64>, predictions: Vec<f64>, timestamps: Vec<i64>) -> Result<Self> {
        let t = targets.len();
        if t == 0 {
            return Err(Error::Empty("dataset has no rows"));
        }
        check_len(t, predictions.len())?;
        check_len(t, timestamps.len())?;
        check_len(t, features.nrows())?;
        if targets.iter().chain(&predictions).chain(features.iter()).any(|v| !v.is_finite()) {
            return Err(invalid("dataset contains missing or non-finite values"));
        }
        if timestamps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("timestamps must be strictly increasing"));
        }
        let errors = compute_errors(&targets, &predictions)?;
        Ok(Self { features, targets, predictions, errors, timestamps })
    }

    /// Builds a dataset with timestamps `0..T`.
    pub fn with_index(features: Matrix, targets: Vec<f64>, predictions: Vec<f64>) -> Result<Self> {
        let ts = (0..targets.len() as i64).collect();
        Self::new(features, targets, predictions, ts)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn predictions(&self) -> &[f64] {
        &self.predictions
    }

    pub fn errors(&self) -> &[f64] {
        &self.errors
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    /// Feature rows `range` as an owned matrix.
    pub fn feature_rows(&self, range: Range<usize>) -> Matrix {
        self.features.rows(range.start, range.len()).into_owned()
    }
}

/// `targets[i] - predictions[i]` for every step.
pub fn compute_errors(targets: &[f64], predictions: &[f64]) -> Result<Vec<f64>> {
    check_len(targets.len(), predictions.len())?;
    if targets.is_empty() {
        return Err(Error::Empty("no targets"));
    }
    Ok(targets.iter().zip(predictions).map(|(y, p)| y - p).collect())
}

/// Contiguous train / calibration / test segmentation by end indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    train_end: usize,
    calib_end: usize,
    test_end: usize,
}

impl SplitSpec {
    pub fn new(train_end: usize, calib_end: usize, test_end: usize, len: usize) -> Result<Self> {
        if !(0 < train_end && train_end < calib_end && calib_end < test_end && test_end <= len) {
            return Err(invalid(format!("split must satisfy 0 < {train_end} < {calib_end} < {test_end} <= {len}")));
        }
        Ok(Self { train_end, calib_end, test_end })
    }

    /// Split by fractions of `len`; the test segment runs to the end when
    /// the fractions sum to one.
    pub fn from_fractions(len: usize, train: f64, calib: f64, test: f64) -> Result<Self> {
        let sum = train + calib + test;
        if !(train > 0.0 && calib > 0.0 && test > 0.0) || sum > 1.0 + 1e-9 {
            return Err(invalid("split fractions must be positive and sum to at most 1"));
        }
        let n = len as f64;
        let train_end = libm::round(n * train) as usize;
        let calib_end = libm::round(n * (train + calib)) as usize;
        let test_end = if (sum - 1.0).abs() <= 1e-9 { len } else { libm::round(n * sum) as usize };
        Self::new(train_end, calib_end, test_end, len)
    }

    pub fn train(&self) -> Range<usize> {
        0..self.train_end
    }

    pub fn calibration(&self) -> Range<usize> {
        self.train_end..self.calib_end
    }

    pub fn test(&self) -> Range<usize> {
        self.calib_end..self.test_end
    }
}

/// Closed interval `[lower, upper]` at miscoverage `alpha`.
///
/// An uninformative interval spans the whole real line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionInterval {
    lower: f64,
    upper: f64,
    alpha: f64,
}

impl PredictionInterval {
    pub fn new(lower: f64, upper: f64, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid(format!("alpha {alpha} not in (0,1)")));
        }
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(invalid(format!("interval bounds [{lower}, {upper}] are not ordered")));
        }
        Ok(Self { lower, upper, alpha })
    }

    pub fn uninformative(alpha: f64) -> Self {
        Self { lower: f64::NEG_INFINITY, upper: f64::INFINITY, alpha }
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn is_informative(&self) -> bool {
        self.lower.is_finite() && self.upper.is_finite()
    }

    /// Boundary values count as covered.
    pub fn covers(&self, y: f64) -> bool {
        self.lower <= y && y <= self.upper
    }
}

/// Nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// Wraps already-normalized weights, checking the invariants.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Empty("weight vector"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(invalid("weights must be finite and nonnegative"));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("weights sum to {sum}, expected 1")));
        }
        Ok(Self(weights))
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("weight vector"));
        }
        Ok(Self(alloc::vec![1.0 / n as f64; n]))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// `raw[i] / sum(raw)`.
pub fn normalize_weights(raw: &[f64]) -> Result<WeightVector> {
    if raw.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(invalid("raw weights must be finite and nonnegative"));
    }
    let sum: f64 = raw.iter().sum();
    if !(sum > 0.0) {
        return Err(invalid("raw weights have no positive mass"));
    }
    Ok(WeightVector(raw.iter().map(|w| w / sum).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn errors_are_direct_differences() {
        assert_eq!(compute_errors(&[3.0, 5.0], &[2.0, 6.0]).unwrap(), vec![1.0, -1.0]);
        assert_eq!(compute_errors(&[0.0], &[0.0]).unwrap(), vec![0.0]);
        let y = [1.5, -2.0, 7.25];
        assert_eq!(compute_errors(&y, &y).unwrap(), vec![0.0; 3]);
        assert!(matches!(compute_errors(&[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_weights(&[1.0; 4]).unwrap().as_slice(), &[0.25; 4]);
        assert_eq!(normalize_weights(&[2.0, 0.0]).unwrap().as_slice(), &[1.0, 0.0]);
        assert_eq!(normalize_weights(&[1.0, 3.0]).unwrap().as_slice(), &[0.25, 0.75]);
        assert!(normalize_weights(&[0.0, 0.0]).is_err());
        assert!(normalize_weights(&[1.0, -1.0]).is_err());
        assert!(normalize_weights(&[f64::NAN]).is_err());
    }

    #[test]
    fn dataset_validation() {
        let x = Matrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]);
        let d = TimeSeriesDataset::with_index(x.clone(), vec![1.0, 2.0, 3.0], vec![0.5, 2.5, 3.0]).unwrap();
        assert_eq!(d.errors(), &[0.5, -0.5, 0.0]);
        assert!(TimeSeriesDataset::new(x.clone(), vec![1.0; 3], vec![1.0; 3], vec![0, 2, 2]).is_err());
        assert!(TimeSeriesDataset::with_index(x.clone(), vec![1.0, f64::NAN, 3.0], vec![1.0; 3]).is_err());
        assert!(TimeSeriesDataset::with_index(x, vec![1.0; 2], vec![1.0; 2]).is_err());
    }

    #[test]
    fn split_bounds() {
        let s = SplitSpec::from_fractions(1000, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0).unwrap();
        assert_eq!(s.train(), 0..333);
        assert_eq!(s.calibration(), 333..667);
        assert_eq!(s.test(), 667..1000);
        assert!(SplitSpec::new(0, 1, 2, 3).is_err());
        assert!(SplitSpec::new(1, 1, 2, 3).is_err());
        assert!(SplitSpec::new(1, 2, 4, 3).is_err());
    }

    #[test]
    fn interval_invariants() {
        assert!(PredictionInterval::new(1.0, 0.0, 0.1).is_err());
        assert!(PredictionInterval::new(0.0, 1.0, 1.0).is_err());
        let pi = PredictionInterval::new(0.0, 1.0, 0.1).unwrap();
        assert!(pi.covers(0.0) && pi.covers(1.0) && !pi.covers(1.0 + 1e-12));
        assert!(!PredictionInterval::uninformative(0.1).is_informative());
    }
}
