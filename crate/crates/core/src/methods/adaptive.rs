//! Online miscoverage adjustment wrapped around any interval method.
//!
//! After each revealed target the internal level moves by
//! `gamma * (alpha_target - err)`, where `err` is 1 on a miss. The momentum
//! variant uses an exponentially weighted average of recent misses
//! (decay 0.95) in place of the latest one.

use crate::error::{invalid, Result};

pub const MOMENTUM_DECAY: f64 = 0.95;
pub const ALPHA_MIN: f64 = 0.001;
pub const ALPHA_MAX: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdaptiveMode {
    Simple,
    Momentum,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveState {
    pub alpha_target: f64,
    pub alpha_current: f64,
    pub gamma: f64,
    pub mode: AdaptiveMode,
    /// Smoothed miss indicator (momentum mode only).
    pub miss_average: f64,
}

impl AdaptiveState {
    pub fn new(alpha_target: f64, gamma: f64, mode: AdaptiveMode) -> Result<Self> {
        if !(alpha_target > 0.0 && alpha_target < 1.0) {
            return Err(invalid("alpha must be in (0,1)"));
        }
        if !(gamma > 0.0) {
            return Err(invalid("gamma must be positive"));
        }
        Ok(Self { alpha_target, alpha_current: alpha_target, gamma, mode, miss_average: alpha_target })
    }
}

pub fn adaptive_update(state: AdaptiveState, covered: bool) -> AdaptiveState {
    let err = if covered { 0.0 } else { 1.0 };
    let (signal, miss_average) = match state.mode {
        AdaptiveMode::Simple => (err, state.miss_average),
        AdaptiveMode::Momentum => {
            let avg = MOMENTUM_DECAY * state.miss_average + (1.0 - MOMENTUM_DECAY) * err;
            (avg, avg)
        }
    };
    let alpha = state.alpha_current + state.gamma * (state.alpha_target - signal);
    AdaptiveState { alpha_current: alpha.clamp(ALPHA_MIN, ALPHA_MAX), miss_average, ..state }
}
