//! Conformal interval methods and the online driver that applies them over
//! a query segment.

mod adaptive;
mod intervals;

use alloc::format;
use alloc::vec::Vec;
use core::ops::Range;

pub use adaptive::{adaptive_update, AdaptiveMode, AdaptiveState, ALPHA_MAX, ALPHA_MIN, MOMENTUM_DECAY};
pub use intervals::{
    enbpi_interval, hopcpt_interval_from_weights, knn_count, knn_cp_interval, knn_neighbors, nexcp_interval,
    nexcp_normalized_weights, nexcp_weights, split_cp_interval, split_cp_signed_interval, QuantileMode,
};

use crate::data::{Matrix, PredictionInterval, SplitSpec, TimeSeriesDataset};
use crate::error::{invalid, Result};
use crate::hopfield::{EncodedMemory, HopfieldModel};
use crate::rng::{derive_seed, label};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MethodVariant {
    HopCpt,
    SplitCp,
    NexCp,
    EnbPi,
    KnnCp,
}

impl MethodVariant {
    pub const ALL: [MethodVariant; 5] = [Self::HopCpt, Self::SplitCp, Self::NexCp, Self::EnbPi, Self::KnnCp];

    pub fn name(self) -> &'static str {
        match self {
            Self::HopCpt => "hopcpt",
            Self::SplitCp => "splitcp",
            Self::NexCp => "nexcp",
            Self::EnbPi => "enbpi",
            Self::KnnCp => "knncp",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name().eq_ignore_ascii_case(name))
    }

    /// No randomness enters the intervals.
    pub fn is_deterministic(self) -> bool {
        !matches!(self, Self::HopCpt)
    }
}

/// Which past steps HopCPT retrieves from at query time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetrievalMemory {
    /// Calibration steps plus every already revealed query step.
    Growing,
    /// Calibration steps only.
    CalibrationOnly,
}

pub const NEXCP_RHO_GRID: [f64; 7] = [0.999, 0.995, 0.993, 0.99, 0.98, 0.95, 0.90];
pub const ENBPI_WINDOW_GRID: [usize; 8] = [200, 150, 125, 100, 75, 50, 25, 10];
pub const KNN_SHARE_GRID: [f64; 8] = [0.025, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35];
pub const ADAPTIVE_GAMMA_GRID: [f64; 4] = [0.002, 0.005, 0.01, 0.02];

#[derive(Debug, Clone, PartialEq)]
pub struct MethodConfig {
    pub variant: MethodVariant,
    pub alpha: f64,
    pub nexcp_rho: f64,
    pub enbpi_window: usize,
    pub knn_top_share: f64,
    pub hopcpt_quantile_mode: QuantileMode,
    /// `None` means `max(1000, memory length)`.
    pub hopcpt_n_draws: Option<usize>,
    pub hopcpt_memory: RetrievalMemory,
    /// Seed for multiset sampling.
    pub seed: u64,
}

impl MethodConfig {
    pub fn new(variant: MethodVariant, alpha: f64) -> Self {
        Self {
            variant,
            alpha,
            nexcp_rho: 0.99,
            enbpi_window: 100,
            knn_top_share: 0.1,
            hopcpt_quantile_mode: QuantileMode::WeightedEcdf,
            hopcpt_n_draws: None,
            hopcpt_memory: RetrievalMemory::Growing,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid(format!("alpha {} not in (0,1)", self.alpha)));
        }
        if !(self.nexcp_rho > 0.0 && self.nexcp_rho <= 1.0) {
            return Err(invalid("nexcp_rho must be in (0,1]"));
        }
        if self.enbpi_window == 0 {
            return Err(invalid("enbpi_window must be at least 1"));
        }
        if !(self.knn_top_share > 0.0 && self.knn_top_share <= 1.0) {
            return Err(invalid("knn_top_share must be in (0,1]"));
        }
        if self.hopcpt_n_draws == Some(0) {
            return Err(invalid("hopcpt_n_draws must be at least 1"));
        }
        Ok(())
    }
}

/// Runs a method over the test segment of `split`, retrieving from the
/// calibration segment onward.
pub fn run_method(
    dataset: &TimeSeriesDataset,
    split: &SplitSpec,
    config: &MethodConfig,
    adaptive: Option<AdaptiveState>,
    model: Option<&HopfieldModel>,
) -> Result<Vec<PredictionInterval>> {
    run_segment(dataset, split.calibration(), split.test(), config, adaptive, model)
}

/// Produces one interval per step of `queries`, in order.
///
/// `history` must end where `queries` starts. Online methods see every
/// query step's error once its target is revealed; split conformal uses
/// `history` only. With an adaptive state, each step is queried at the
/// current internal level and the state is updated with the outcome.
pub fn run_segment(
    dataset: &TimeSeriesDataset,
    history: Range<usize>,
    queries: Range<usize>,
    config: &MethodConfig,
    mut adaptive: Option<AdaptiveState>,
    model: Option<&HopfieldModel>,
) -> Result<Vec<PredictionInterval>> {
    config.validate()?;
    if history.is_empty() || history.end != queries.start || queries.end > dataset.len() {
        return Err(invalid("history must be non-empty and immediately precede the queries"));
    }
    let errors = dataset.errors();
    let preds = dataset.predictions();
    let features = dataset.features();

    let memory = match config.variant {
        MethodVariant::HopCpt => {
            let model = model.ok_or_else(|| invalid("HopCPT requires a trained model"))?;
            model.validate()?;
            let rows = dataset.feature_rows(history.start..queries.end);
            Some(EncodedMemory::new(model, &rows)?)
        }
        _ => None,
    };
    let split_abs: Vec<f64> = errors[history.clone()].iter().map(|e| e.abs()).collect();

    let mut out = Vec::with_capacity(queries.len());
    for q in queries.clone() {
        let alpha = adaptive.map_or(config.alpha, |s| s.alpha_current);
        let past = history.start..q;
        let yhat = preds[q];
        let interval = match config.variant {
            MethodVariant::SplitCp => split_cp_interval(&split_abs, yhat, alpha)?,
            MethodVariant::NexCp => nexcp_interval(&errors[past], yhat, alpha, config.nexcp_rho)?,
            MethodVariant::EnbPi => {
                let start = q.saturating_sub(config.enbpi_window).max(history.start);
                enbpi_interval(&errors[start..q], yhat, alpha)?
            }
            MethodVariant::KnnCp => {
                let hist: Matrix = dataset.feature_rows(past.clone());
                let query: Vec<f64> = features.row(q).iter().copied().collect();
                knn_cp_interval(&hist, &errors[past], &query, config.knn_top_share, yhat, alpha)?
            }
            MethodVariant::HopCpt => {
                let memory = memory.as_ref().expect("memory is built for HopCPT");
                let mem_range = match config.hopcpt_memory {
                    RetrievalMemory::Growing => past.clone(),
                    RetrievalMemory::CalibrationOnly => history.clone(),
                };
                let local = (mem_range.start - history.start)..(mem_range.end - history.start);
                let w = memory.weights(q - history.start, local)?;
                let n_draws = config.hopcpt_n_draws.unwrap_or(mem_range.len().max(1000));
                let seed = derive_seed(config.seed, &[label("hopcpt-draws"), q as u64]);
                hopcpt_interval_from_weights(
                    &w,
                    &errors[mem_range],
                    yhat,
                    alpha,
                    config.hopcpt_quantile_mode,
                    n_draws,
                    seed,
                )?
            }
        };
        if let Some(state) = adaptive.as_mut() {
            *state = adaptive_update(*state, interval.covers(dataset.targets()[q]));
        }
        out.push(interval);
    }
    Ok(out)
}
