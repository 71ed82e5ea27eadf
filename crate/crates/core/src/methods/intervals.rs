//! Interval constructors for a single query step.

use alloc::vec::Vec;

use crate::data::{Matrix, PredictionInterval, WeightVector};
use crate::error::{check_len, invalid, Error, Result};
use crate::quantile::{
    conformal_quantile, empirical_quantile, order_statistic_with_tail, weighted_quantile_ecdf,
    weighted_quantile_with_tail, weighted_sample, QuantileLevel, QuantileValue,
};

fn levels(alpha: f64) -> Result<(QuantileLevel, QuantileLevel)> {
    Ok((QuantileLevel::new(alpha / 2.0)?, QuantileLevel::new(1.0 - alpha / 2.0)?))
}

fn offset_interval(prediction: f64, lower: f64, upper: f64, alpha: f64) -> Result<PredictionInterval> {
    PredictionInterval::new(prediction + lower, prediction + upper, alpha)
}

fn bounded(prediction: f64, lower: QuantileValue, upper: QuantileValue, alpha: f64) -> Result<PredictionInterval> {
    match (lower, upper) {
        (QuantileValue::Finite(l), QuantileValue::Finite(u)) => offset_interval(prediction, l, u, alpha),
        _ => Ok(PredictionInterval::uninformative(alpha)),
    }
}

/// Standard split conformal: `prediction +- q` with `q` the conformal
/// quantile of the absolute calibration errors.
pub fn split_cp_interval(calib_abs_errors: &[f64], prediction: f64, alpha: f64) -> Result<PredictionInterval> {
    match conformal_quantile(calib_abs_errors, alpha)? {
        QuantileValue::Finite(q) => offset_interval(prediction, -q, q, alpha),
        QuantileValue::Unbounded => Ok(PredictionInterval::uninformative(alpha)),
    }
}

/// Split conformal on signed errors with separate `alpha/2` and
/// `1 - alpha/2` order statistics, including the unit test-point mass at
/// `+inf`. This is the uniform-weight member of the weighted family.
pub fn split_cp_signed_interval(calib_errors: &[f64], prediction: f64, alpha: f64) -> Result<PredictionInterval> {
    let (lo, hi) = levels(alpha)?;
    if calib_errors.is_empty() {
        return Err(Error::Empty("calibration errors"));
    }
    let mut sorted = calib_errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lower = order_statistic_with_tail(&sorted, lo.get());
    let upper = order_statistic_with_tail(&sorted, hi.get());
    bounded(prediction, lower, upper, alpha)
}

/// Exponential-decay weights `rho^(t + 1 - i)` for `i = 1..=t`; the test
/// point carries weight one.
pub fn nexcp_weights(t: usize, rho: f64) -> Vec<f64> {
    (1..=t).map(|i| libm::pow(rho, (t + 1 - i) as f64)).collect()
}

/// Normalized finite weights and the test-point mass.
pub fn nexcp_normalized_weights(t: usize, rho: f64) -> (Vec<f64>, f64) {
    let w = nexcp_weights(t, rho);
    let z: f64 = w.iter().sum::<f64>() + 1.0;
    (w.iter().map(|v| v / z).collect(), 1.0 / z)
}

/// Exponentially weighted conformal interval over signed errors (oldest
/// first). The `+inf` test mass turns the interval uninformative when the
/// finite mass cannot reach a quantile level.
pub fn nexcp_interval(errors: &[f64], prediction: f64, alpha: f64, rho: f64) -> Result<PredictionInterval> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(invalid("rho must be in (0,1]"));
    }
    let (lo, hi) = levels(alpha)?;
    let w = nexcp_weights(errors.len(), rho);
    let lower = weighted_quantile_with_tail(errors, &w, 1.0, lo.get())?;
    let upper = weighted_quantile_with_tail(errors, &w, 1.0, hi.get())?;
    bounded(prediction, lower, upper, alpha)
}

/// Empirical `alpha/2` and `1 - alpha/2` quantiles of a window of recent
/// signed errors.
pub fn enbpi_interval(recent_errors: &[f64], prediction: f64, alpha: f64) -> Result<PredictionInterval> {
    let (lo, hi) = levels(alpha)?;
    let lower = empirical_quantile(recent_errors, lo)?;
    let upper = empirical_quantile(recent_errors, hi)?;
    offset_interval(prediction, lower, upper, alpha)
}

/// Number of neighbours for a top share of `n` history points.
pub fn knn_count(k_share: f64, n: usize) -> usize {
    (libm::ceil(k_share * n as f64) as usize).clamp(1, n.max(1))
}

/// Indices of the `k` history rows nearest to `query` after z-scoring each
/// feature by the history's mean and standard deviation. Equal distances
/// prefer the more recent row.
pub fn knn_neighbors(history: &Matrix, query: &[f64], k: usize) -> Result<Vec<usize>> {
    check_len(history.ncols(), query.len())?;
    let n = history.nrows();
    if n == 0 {
        return Err(Error::Empty("kNN history"));
    }
    let m = history.ncols();
    let mut scale = Vec::with_capacity(m);
    for j in 0..m {
        let col = history.column(j);
        let mean = col.mean();
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let sd = libm::sqrt(var);
        scale.push((mean, if sd > 0.0 { sd } else { 1.0 }));
    }
    let z = |v: f64, j: usize| (v - scale[j].0) / scale[j].1;
    let mut dist: Vec<(f64, usize)> = (0..n)
        .map(|i| {
            let d2: f64 = (0..m)
                .map(|j| {
                    let d = z(history[(i, j)], j) - z(query[j], j);
                    d * d
                })
                .sum();
            (d2, i)
        })
        .collect();
    dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
    Ok(dist.into_iter().take(k.min(n)).map(|(_, i)| i).collect())
}

/// Interval from the signed errors of the nearest history points.
pub fn knn_cp_interval(
    history_features: &Matrix,
    history_errors: &[f64],
    query_features: &[f64],
    k_share: f64,
    prediction: f64,
    alpha: f64,
) -> Result<PredictionInterval> {
    check_len(history_features.nrows(), history_errors.len())?;
    if !(k_share > 0.0 && k_share <= 1.0) {
        return Err(invalid("k_share must be in (0,1]"));
    }
    let k = knn_count(k_share, history_errors.len());
    let idx = knn_neighbors(history_features, query_features, k)?;
    let selected: Vec<f64> = idx.iter().map(|&i| history_errors[i]).collect();
    enbpi_interval(&selected, prediction, alpha)
}

/// How the retrieval weights are turned into bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuantileMode {
    /// Draw a multiset of errors by weight and take empirical quantiles.
    SampledMultiset,
    /// Quantiles of the weighted empirical CDF of the errors.
    WeightedEcdf,
}

/// Interval from association weights over past signed errors.
pub fn hopcpt_interval_from_weights(
    weights: &WeightVector,
    errors: &[f64],
    prediction: f64,
    alpha: f64,
    mode: QuantileMode,
    n_draws: usize,
    seed: u64,
) -> Result<PredictionInterval> {
    check_len(errors.len(), weights.len())?;
    let (lo, hi) = levels(alpha)?;
    match mode {
        QuantileMode::WeightedEcdf => {
            let lower = weighted_quantile_ecdf(errors, weights, lo)?;
            let upper = weighted_quantile_ecdf(errors, weights, hi)?;
            offset_interval(prediction, lower, upper, alpha)
        }
        QuantileMode::SampledMultiset => {
            let draws = weighted_sample(errors, weights, n_draws, seed)?;
            enbpi_interval(&draws, prediction, alpha)
        }
    }
}
