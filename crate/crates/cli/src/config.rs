//! Experiment configuration file (TOML).
//!
//! Every section and key is optional; missing values take the defaults
//! shown in `configs/synthetic.toml`. Unknown keys are rejected.
//! `schema_version` must be 1.

use std::path::{Path, PathBuf};

use hopcpt_core::basemodel::RegimeSeriesConfig;
use hopcpt_core::hopfield::TrainConfig;
use hopcpt_core::methods::{
    AdaptiveMode, MethodConfig, MethodVariant, QuantileMode, RetrievalMemory, ADAPTIVE_GAMMA_GRID, ENBPI_WINDOW_GRID,
    KNN_SHARE_GRID, NEXCP_RHO_GRID,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub output_dir: PathBuf,
    /// Master seed; every run, method and component stream derives from it.
    pub master_seed: u64,
    /// Number of repetitions.
    pub seeds: usize,
    pub alphas: Vec<f64>,
    pub jobs: usize,
    pub data: DataConfig,
    pub hopcpt: HopfieldConfig,
    pub methods: Vec<MethodSpec>,
    pub local_coverage_windows: Vec<usize>,
    pub rolling_windows: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            output_dir: PathBuf::from("results"),
            master_seed: 0,
            seeds: 12,
            alphas: vec![0.05, 0.10, 0.15],
            jobs: 1,
            data: DataConfig::default(),
            hopcpt: HopfieldConfig::default(),
            methods: ["hopcpt", "splitcp", "nexcp", "enbpi", "knncp"].into_iter().map(MethodSpec::named).collect(),
            local_coverage_windows: vec![10, 20, 50],
            rolling_windows: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Synthetic,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseModel {
    /// Fit ridge regression on the training segment.
    Ridge,
    /// Use the `y_hat` column of the input file.
    Provided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub source: DataSource,
    pub path: Option<PathBuf>,
    pub base_model: BaseModel,
    pub ridge_lambda: f64,
    /// Train, calibration and test fractions.
    pub split: [f64; 3],
    /// Feature columns (indices into `x0..`) seen by kNN and HopCPT; all when absent.
    pub retrieval_features: Option<Vec<usize>>,
    pub synthetic: SyntheticConfig,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            source: DataSource::Synthetic,
            path: None,
            base_model: BaseModel::Ridge,
            ridge_lambda: 1.0,
            split: [1.0 / 3.0; 3],
            retrieval_features: None,
            synthetic: SyntheticConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub total_steps: usize,
    pub x_low: f64,
    pub x_high: f64,
    pub regime_len_min: usize,
    pub regime_len_max: usize,
    pub base_level: f64,
    /// Generator seed for `generate`, and for `run`/`grid` when
    /// `vary_with_seed` is off.
    pub seed: u64,
    /// Draw a fresh series for every repetition.
    pub vary_with_seed: bool,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        let d = RegimeSeriesConfig::default();
        Self {
            total_steps: d.total_steps,
            x_low: d.x_low,
            x_high: d.x_high,
            regime_len_min: d.regime_len_min,
            regime_len_max: d.regime_len_max,
            base_level: d.base_level,
            seed: d.seed,
            vary_with_seed: true,
        }
    }
}

impl SyntheticConfig {
    pub fn generator(&self, seed: u64) -> RegimeSeriesConfig {
        RegimeSeriesConfig {
            total_steps: self.total_steps,
            x_low: self.x_low,
            x_high: self.x_high,
            regime_len_min: self.regime_len_min,
            regime_len_max: self.regime_len_max,
            base_level: self.base_level,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HopfieldConfig {
    pub epochs: usize,
    pub validate_every: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    pub time_encoding: bool,
    pub weight_decay: f64,
    pub adamw_beta1: f64,
    pub adamw_beta2: f64,
    pub batch_size: usize,
    pub hidden: usize,
    pub encoding: usize,
    pub attention: usize,
    pub beta: Option<f64>,
}

impl Default for HopfieldConfig {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            epochs: d.epochs,
            validate_every: d.validate_every,
            learning_rate: d.learning_rate,
            dropout: d.dropout,
            time_encoding: d.use_time_encoding,
            weight_decay: d.weight_decay,
            adamw_beta1: d.adamw_beta1,
            adamw_beta2: d.adamw_beta2,
            batch_size: d.batch_size,
            hidden: d.hidden,
            encoding: d.encoding,
            attention: d.attention,
            beta: d.beta,
        }
    }
}

impl HopfieldConfig {
    pub fn train_config(&self, alpha: f64, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            validate_every: self.validate_every,
            learning_rate: self.learning_rate,
            dropout: self.dropout,
            use_time_encoding: self.time_encoding,
            adamw_beta1: self.adamw_beta1,
            adamw_beta2: self.adamw_beta2,
            weight_decay: self.weight_decay,
            batch_size: self.batch_size,
            seed,
            alpha,
            hidden: self.hidden,
            encoding: self.encoding,
            attention: self.attention,
            beta: self.beta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuantileModeSpec {
    Ecdf,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MemorySpec {
    Growing,
    Calibration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdaptiveModeSpec {
    Simple,
    Momentum,
}

impl From<AdaptiveModeSpec> for AdaptiveMode {
    fn from(m: AdaptiveModeSpec) -> Self {
        match m {
            AdaptiveModeSpec::Simple => AdaptiveMode::Simple,
            AdaptiveModeSpec::Momentum => AdaptiveMode::Momentum,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptiveSpec {
    pub mode: AdaptiveModeSpec,
    pub gamma: f64,
}

/// Value lists searched by `grid`; absent lists use the method's default grid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub nexcp_rho: Option<Vec<f64>>,
    pub enbpi_window: Option<Vec<usize>>,
    pub knn_top_share: Option<Vec<f64>>,
    pub learning_rate: Option<Vec<f64>>,
    pub dropout: Option<Vec<f64>>,
    pub time_encoding: Option<Vec<bool>>,
    pub adaptive_mode: Option<Vec<AdaptiveModeSpec>>,
    pub adaptive_gamma: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    /// One of `hopcpt`, `splitcp`, `nexcp`, `enbpi`, `knncp`.
    pub name: String,
    /// Name used in outputs; defaults to `name` (plus `+aci` when adaptive).
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub nexcp_rho: Option<f64>,
    #[serde(default)]
    pub enbpi_window: Option<usize>,
    #[serde(default)]
    pub knn_top_share: Option<f64>,
    #[serde(default)]
    pub quantile_mode: Option<QuantileModeSpec>,
    #[serde(default)]
    pub n_draws: Option<usize>,
    #[serde(default)]
    pub memory: Option<MemorySpec>,
    #[serde(default)]
    pub adaptive: Option<AdaptiveSpec>,
    #[serde(default)]
    pub grid: GridSpec,
}

impl MethodSpec {
    pub fn named(name: &str) -> Self {
        Self {
            name: name.to_string(),
            label: None,
            nexcp_rho: None,
            enbpi_window: None,
            knn_top_share: None,
            quantile_mode: None,
            n_draws: None,
            memory: None,
            adaptive: None,
            grid: GridSpec::default(),
        }
    }

    pub fn variant(&self) -> Result<MethodVariant, CliError> {
        MethodVariant::from_name(&self.name).ok_or_else(|| CliError::Config(format!("unknown method `{}`", self.name)))
    }

    pub fn label(&self) -> String {
        match (&self.label, &self.adaptive) {
            (Some(l), _) => l.clone(),
            (None, Some(_)) => format!("{}+aci", self.name.to_ascii_lowercase()),
            (None, None) => self.name.to_ascii_lowercase(),
        }
    }

    pub fn method_config(&self, alpha: f64, seed: u64) -> Result<MethodConfig, CliError> {
        let mut c = MethodConfig::new(self.variant()?, alpha);
        if let Some(v) = self.nexcp_rho {
            c.nexcp_rho = v;
        }
        if let Some(v) = self.enbpi_window {
            c.enbpi_window = v;
        }
        if let Some(v) = self.knn_top_share {
            c.knn_top_share = v;
        }
        if let Some(m) = self.quantile_mode {
            c.hopcpt_quantile_mode = match m {
                QuantileModeSpec::Ecdf => QuantileMode::WeightedEcdf,
                QuantileModeSpec::Sampled => QuantileMode::SampledMultiset,
            };
        }
        c.hopcpt_n_draws = self.n_draws;
        if let Some(m) = self.memory {
            c.hopcpt_memory = match m {
                MemorySpec::Growing => RetrievalMemory::Growing,
                MemorySpec::Calibration => RetrievalMemory::CalibrationOnly,
            };
        }
        c.seed = seed;
        c.validate().map_err(|e| CliError::Config(format!("method `{}`: {e}", self.label())))?;
        Ok(c)
    }

    pub fn nexcp_grid(&self) -> Vec<f64> {
        self.grid.nexcp_rho.clone().unwrap_or_else(|| NEXCP_RHO_GRID.to_vec())
    }

    pub fn enbpi_grid(&self) -> Vec<usize> {
        self.grid.enbpi_window.clone().unwrap_or_else(|| ENBPI_WINDOW_GRID.to_vec())
    }

    pub fn knn_grid(&self) -> Vec<f64> {
        self.grid.knn_top_share.clone().unwrap_or_else(|| KNN_SHARE_GRID.to_vec())
    }

    pub fn learning_rate_grid(&self) -> Vec<f64> {
        self.grid.learning_rate.clone().unwrap_or_else(|| vec![0.01, 0.001])
    }

    pub fn dropout_grid(&self) -> Vec<f64> {
        self.grid.dropout.clone().unwrap_or_else(|| vec![0.0, 0.25, 0.5])
    }

    pub fn time_encoding_grid(&self) -> Vec<bool> {
        self.grid.time_encoding.clone().unwrap_or_else(|| vec![true, false])
    }

    /// Adaptive settings searched by `grid`; empty unless the method is adaptive.
    pub fn adaptive_grid(&self) -> Vec<AdaptiveSpec> {
        if self.adaptive.is_none() {
            return Vec::new();
        }
        let modes = self
            .grid
            .adaptive_mode
            .clone()
            .unwrap_or_else(|| vec![AdaptiveModeSpec::Simple, AdaptiveModeSpec::Momentum]);
        let gammas = self.grid.adaptive_gamma.clone().unwrap_or_else(|| ADAPTIVE_GAMMA_GRID.to_vec());
        modes.iter().flat_map(|&mode| gammas.iter().map(move |&gamma| AdaptiveSpec { mode, gamma })).collect()
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("unsupported schema_version {} (expected {SCHEMA_VERSION})", self.schema_version));
        }
        if self.seeds == 0 {
            return bad("at least one seed is required".into());
        }
        if self.alphas.is_empty() || self.alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return bad("alphas must be a non-empty list of values in (0,1)".into());
        }
        let s = self.data.split;
        if s.iter().any(|f| !(*f > 0.0)) || s.iter().sum::<f64>() > 1.0 + 1e-9 {
            return bad("split fractions must be positive and sum to at most 1".into());
        }
        if self.data.source == DataSource::Csv && self.data.path.is_none() {
            return bad("data.path is required for csv input".into());
        }
        if self.methods.is_empty() {
            return bad("no methods configured".into());
        }
        let mut labels = std::collections::BTreeSet::new();
        for m in &self.methods {
            m.method_config(self.alphas[0], 0)?;
            if !labels.insert(m.label()) {
                return bad(format!("duplicate method label `{}`", m.label()));
            }
            if let Some(a) = m.adaptive {
                if !(a.gamma > 0.0) {
                    return bad(format!("method `{}`: gamma must be positive", m.label()));
                }
            }
        }
        if self.jobs == 0 {
            return bad("jobs must be at least 1".into());
        }
        Ok(())
    }
}
