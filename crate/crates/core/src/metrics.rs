//! Coverage gap, interval width, Winkler score and windowed local coverage.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::data::PredictionInterval;
use crate::error::{check_len, invalid, Error, Result};

pub const DEFAULT_WINDOWS: [usize; 3] = [10, 20, 50];

/// `alpha - alpha*`, where `alpha*` is the fraction of targets outside
/// their (closed) interval.
pub fn delta_cov(intervals: &[PredictionInterval], targets: &[f64], alpha: f64) -> Result<f64> {
    check_len(intervals.len(), targets.len())?;
    if intervals.is_empty() {
        return Err(Error::Empty("no intervals"));
    }
    let misses = intervals.iter().zip(targets).filter(|(pi, y)| !pi.covers(**y)).count();
    Ok(alpha - misses as f64 / intervals.len() as f64)
}

/// Width plus `2/alpha` times the distance by which the target misses.
pub fn winkler_score(interval: &PredictionInterval, target: f64, alpha: f64) -> f64 {
    let width = interval.width();
    if target < interval.lower() {
        width + 2.0 / alpha * (interval.lower() - target)
    } else if target > interval.upper() {
        width + 2.0 / alpha * (target - interval.upper())
    } else {
        width
    }
}

/// Window placement for [`local_coverage`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WindowMode {
    /// Consecutive non-overlapping windows; a trailing partial window is dropped.
    #[default]
    Disjoint,
    /// Every window of length `k` (stride one).
    Rolling,
}

/// Mean over windows of `-min(delta_cov_w, 0)`: zero when no window
/// undercovers, larger when coverage breaks down locally.
pub fn local_coverage(
    intervals: &[PredictionInterval],
    targets: &[f64],
    alpha: f64,
    window: usize,
    mode: WindowMode,
) -> Result<f64> {
    check_len(intervals.len(), targets.len())?;
    if window == 0 {
        return Err(invalid("window size must be at least 1"));
    }
    if intervals.len() < window {
        return Err(invalid(alloc::format!("series of {} steps is shorter than window {window}", intervals.len())));
    }
    let misses: Vec<u32> = intervals.iter().zip(targets).map(|(pi, y)| u32::from(!pi.covers(*y))).collect();
    let starts: Vec<usize> = match mode {
        WindowMode::Disjoint => (0..misses.len() / window).map(|w| w * window).collect(),
        WindowMode::Rolling => (0..=misses.len() - window).collect(),
    };
    let total: f64 = starts
        .iter()
        .map(|&s| {
            let m: u32 = misses[s..s + window].iter().sum();
            let gap = alpha - f64::from(m) / window as f64;
            -gap.min(0.0)
        })
        .sum();
    Ok(total / starts.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub alpha: f64,
    pub delta_cov: f64,
    pub mean_pi_width: f64,
    pub mean_winkler: f64,
    /// Mean absolute target of the evaluated steps.
    pub target_scale: f64,
    /// Local coverage deficiency per window size; sizes longer than the
    /// series are omitted.
    pub local_coverage: BTreeMap<usize, f64>,
    pub n_test: usize,
}

impl EvalReport {
    pub fn normalized_pi_width(&self) -> f64 {
        self.mean_pi_width / self.target_scale
    }

    pub fn normalized_winkler(&self) -> f64 {
        self.mean_winkler / self.target_scale
    }
}

/// All metrics for one interval series.
pub fn evaluate(
    intervals: &[PredictionInterval],
    targets: &[f64],
    alpha: f64,
    windows: &[usize],
    mode: WindowMode,
) -> Result<EvalReport> {
    let delta_cov = delta_cov(intervals, targets, alpha)?;
    let n = intervals.len() as f64;
    let mean_pi_width = intervals.iter().map(PredictionInterval::width).sum::<f64>() / n;
    let mean_winkler = intervals.iter().zip(targets).map(|(pi, y)| winkler_score(pi, *y, alpha)).sum::<f64>() / n;
    let target_scale = targets.iter().map(|y| y.abs()).sum::<f64>() / n;
    let mut local = BTreeMap::new();
    for &k in windows.iter().filter(|&&k| k >= 1 && k <= intervals.len()) {
        local.insert(k, local_coverage(intervals, targets, alpha, k, mode)?);
    }
    Ok(EvalReport {
        alpha,
        delta_cov,
        mean_pi_width,
        mean_winkler,
        target_scale,
        local_coverage: local,
        n_test: intervals.len(),
    })
}
