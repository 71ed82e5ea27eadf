//! Similarity-weighted conformal prediction intervals for time series.
//!
//! The crate is `no_std` and needs only `alloc`. It contains:
//!
//! * [`data`]: datasets, splits, intervals and weight vectors,
//! * [`quantile`]: type-1 empirical, conformal and weighted-ECDF quantiles,
//! * [`basemodel`]: closed-form ridge regression and a two-regime generator,
//! * [`hopfield`]: the learned association model, its gradients and training,
//! * [`methods`]: HopCPT, split conformal, NexCP, EnbPI, kNN and AdaptiveCI,
//! * [`metrics`]: coverage gap, width, Winkler score and local coverage.
//!
//! File formats, configuration and the experiment runner live in the `hopcpt`
//! companion crate.

#![no_std]
// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
extern crate alloc;

pub mod basemodel;
pub mod data;
pub mod error;
pub mod hopfield;
pub mod methods;
pub mod metrics;
pub mod quantile;
pub mod rng;

pub use data::{Matrix, PredictionInterval, SplitSpec, TimeSeriesDataset, WeightVector};
pub use error::{Error, Result};
pub use hopfield::{select_model, HopfieldModel, TrainConfig, ValidationScore};
pub use methods::{run_method, MethodConfig, MethodVariant, QuantileMode};
pub use metrics::{evaluate, EvalReport};
