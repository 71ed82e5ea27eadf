//! Quantiles over finite samples.
//!
//! One convention is used throughout: the type-1 (inverse ECDF, no
//! interpolation) quantile. The `tau`-quantile of `n` values is the `k`-th
//! order statistic with `k = ceil(tau * n)`. The weighted version returns the
//! smallest value whose cumulative weight reaches `tau` of the total mass.
//!
//! Rank thresholds are shrunk by a relative `1e-12` before the ceiling so
//! that products like `0.1 * 30` which land a rounding error above an
//! integer still select that integer. The same threshold is shared by the
//! unweighted and weighted paths, which keeps them in exact agreement on
//! uniform weights.

use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

use crate::data::WeightVector;
use crate::error::{check_len, invalid, Error, Result};
use crate::rng::rng_from_seed;

const RANK_EPS: f64 = 1e-12;

/// A quantile level strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct QuantileLevel(f64);

impl QuantileLevel {
    pub fn new(tau: f64) -> Result<Self> {
        if tau > 0.0 && tau < 1.0 {
            Ok(Self(tau))
        } else {
            Err(invalid(alloc::format!("quantile level {tau} not in (0,1)")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Result of a quantile that may fall on the point mass at `+inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuantileValue {
    Finite(f64),
    /// Not enough finite mass: the quantile is the `+inf` sentinel.
    Unbounded,
}

impl QuantileValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            Self::Finite(v) => Some(v),
            Self::Unbounded => None,
        }
    }
}

#[inline]
fn mass_threshold(tau: f64, total: f64) -> f64 {
    tau * total * (1.0 - RANK_EPS)
}

/// 1-based order-statistic rank `ceil(tau * total)`; may exceed `total`.
fn rank(tau: f64, total: usize) -> usize {
    (libm::ceil(mass_threshold(tau, total as f64)) as usize).max(1)
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

fn check_finite(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Empty("quantile of an empty sample"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(invalid("quantile input must be finite"));
    }
    Ok(())
}

/// `k`-th smallest value with `k = ceil(tau * n)`, clamped to the maximum.
pub fn empirical_quantile(values: &[f64], tau: QuantileLevel) -> Result<f64> {
    check_finite(values)?;
    let v = sorted(values);
    let k = rank(tau.get(), v.len()).min(v.len());
    Ok(v[k - 1])
}

/// Split-conformal quantile: the `ceil((n+1)(1-alpha))`-th smallest score,
/// or [`QuantileValue::Unbounded`] when that rank exceeds `n`.
pub fn conformal_quantile(scores: &[f64], alpha: f64) -> Result<QuantileValue> {
    check_finite(scores)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid("alpha must be in (0,1)"));
    }
    let v = sorted(scores);
    Ok(order_statistic_with_tail(&v, 1.0 - alpha))
}

/// Type-1 quantile of the uniform distribution over `sorted` plus one extra
/// unit mass at `+inf`.
pub(crate) fn order_statistic_with_tail(sorted: &[f64], tau: f64) -> QuantileValue {
    let k = rank(tau, sorted.len() + 1);
    if k > sorted.len() {
        QuantileValue::Unbounded
    } else {
        QuantileValue::Finite(sorted[k - 1])
    }
}

/// Quantile of the weighted empirical CDF `sum_i w_i delta(values_i)`.
pub fn weighted_quantile_ecdf(values: &[f64], weights: &WeightVector, tau: QuantileLevel) -> Result<f64> {
    match weighted_quantile_with_tail(values, weights.as_slice(), 0.0, tau.get())? {
        QuantileValue::Finite(v) => Ok(v),
        // Unreachable with zero tail mass; kept total for robustness.
        QuantileValue::Unbounded => Ok(values.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
    }
}

/// Quantile of `sum_i w_i delta(values_i) + tail_mass * delta(+inf)` with
/// un-normalized weights. Returns `Unbounded` when the finite mass never
/// reaches `tau` of the total.
pub fn weighted_quantile_with_tail(
    values: &[f64],
    raw_weights: &[f64],
    tail_mass: f64,
    tau: f64,
) -> Result<QuantileValue> {
    check_len(values.len(), raw_weights.len())?;
    check_finite(values)?;
    if raw_weights.iter().any(|w| !w.is_finite() || *w < 0.0) || !(tail_mass >= 0.0) {
        return Err(invalid("weights must be finite and nonnegative"));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let total: f64 = raw_weights.iter().sum::<f64>() + tail_mass;
    if !(total > 0.0) {
        return Err(invalid("weights have no positive mass"));
    }
    let threshold = mass_threshold(tau, total);
    let mut cum = 0.0;
    for &i in &order {
        cum += raw_weights[i];
        if raw_weights[i] > 0.0 && cum >= threshold {
            return Ok(QuantileValue::Finite(values[i]));
        }
    }
    if tail_mass > 0.0 {
        Ok(QuantileValue::Unbounded)
    } else {
        // Rounding left the cumulative sum just short of the threshold.
        let last = order.iter().rev().find(|&&i| raw_weights[i] > 0.0).copied().unwrap_or(order[order.len() - 1]);
        Ok(QuantileValue::Finite(values[last]))
    }
}

/// `n_draws` i.i.d. draws from `values` with probabilities `weights`,
/// reproducible from `seed`.
pub fn weighted_sample(values: &[f64], weights: &WeightVector, n_draws: usize, seed: u64) -> Result<Vec<f64>> {
    check_len(values.len(), weights.len())?;
    if n_draws == 0 {
        return Err(invalid("n_draws must be at least 1"));
    }
    let dist = WeightedIndex::new(weights.as_slice()).map_err(|e| invalid(alloc::format!("{e}")))?;
    let mut rng = rng_from_seed(seed);
    Ok((0..n_draws).map(|_| values[dist.sample(&mut rng)]).collect())
}
