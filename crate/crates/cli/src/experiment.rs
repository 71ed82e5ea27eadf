//! Seeded experiment runs and grid search.
//!
//! Work is split into units of (repetition, alpha). Each unit prepares its
//! data, trains the retrieval model when a HopCPT method is configured, and
//! runs every method on the test segment. Units run on a rayon pool and are
//! collected in a fixed order, so outputs do not depend on `jobs`.

use std::ops::Range;

use hopcpt_core::basemodel::{generate_regime_series, ridge_fit, ridge_predict};
use hopcpt_core::hopfield::{train, CalibrationSegment};
use hopcpt_core::methods::{run_method, run_segment, AdaptiveState};
use hopcpt_core::metrics::{evaluate, WindowMode};
use hopcpt_core::rng::{derive_seed, label};
use hopcpt_core::{
    select_model, EvalReport, HopfieldModel, Matrix, MethodVariant, PredictionInterval, SplitSpec, TimeSeriesDataset,
    ValidationScore,
};
use rayon::prelude::*;

use crate::config::{AdaptiveSpec, BaseModel, DataSource, ExperimentConfig, HopfieldConfig, MethodSpec};
use crate::csvio::{read_series, IntervalRow, SeriesTable};
use crate::CliError;

/// Seed of repetition `index`.
pub fn run_seed(master: u64, index: usize) -> u64 {
    derive_seed(master, &[label("run"), index as u64])
}

/// Dataset seen by the interval methods, plus its segmentation.
#[derive(Debug, Clone)]
pub struct PreparedData {
    /// Predictions from the base model; features restricted to the retrieval subset.
    pub dataset: TimeSeriesDataset,
    pub split: SplitSpec,
}

fn load_table(cfg: &ExperimentConfig, index: usize) -> Result<SeriesTable, CliError> {
    match cfg.data.source {
        DataSource::Csv => read_series(cfg.data.path.as_deref().expect("validated")),
        DataSource::Synthetic => {
            let syn = &cfg.data.synthetic;
            let seed = if syn.vary_with_seed {
                derive_seed(run_seed(cfg.master_seed, index), &[label("data")])
            } else {
                syn.seed
            };
            let s = generate_regime_series(&syn.generator(seed))?;
            Ok(SeriesTable { timestamps: s.timestamps, targets: s.targets, predictions: None, features: s.features })
        }
    }
}

fn select_columns(m: &Matrix, cols: &[usize]) -> Result<Matrix, CliError> {
    if let Some(&bad) = cols.iter().find(|&&c| c >= m.ncols()) {
        return Err(CliError::Config(format!("retrieval feature x{bad} does not exist ({} features)", m.ncols())));
    }
    Ok(Matrix::from_fn(m.nrows(), cols.len(), |i, j| m[(i, cols[j])]))
}

pub fn prepare_data(cfg: &ExperimentConfig, index: usize) -> Result<PreparedData, CliError> {
    let table = load_table(cfg, index)?;
    let [a, b, c] = cfg.data.split;
    let split = SplitSpec::from_fractions(table.targets.len(), a, b, c)?;
    let predictions = match cfg.data.base_model {
        BaseModel::Provided => table
            .predictions
            .clone()
            .ok_or_else(|| CliError::Config("base_model = \"provided\" needs a `y_hat` column".into()))?,
        BaseModel::Ridge => {
            let train_range = split.train();
            let x = table.features.rows(0, train_range.end).into_owned();
            let model = ridge_fit(&x, &table.targets[train_range], cfg.data.ridge_lambda)?;
            ridge_predict(&model, &table.features)?
        }
    };
    let features = match &cfg.data.retrieval_features {
        Some(cols) => select_columns(&table.features, cols)?,
        None => table.features,
    };
    let dataset = TimeSeriesDataset::new(features, table.targets, predictions, table.timestamps)?;
    Ok(PreparedData { dataset, split })
}

/// Metrics and intervals of one (method, alpha, repetition) cell.
#[derive(Debug, Clone)]
pub struct CellResult {
    pub method: String,
    pub alpha: f64,
    pub seed: usize,
    pub params: String,
    pub report: EvalReport,
    pub intervals: Vec<IntervalRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub method: String,
    pub alpha: f64,
    pub seed: usize,
    pub message: String,
}

/// One evaluated candidate of a grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub method: String,
    pub alpha: f64,
    pub seed: usize,
    pub candidate: usize,
    pub params: String,
    pub score: ValidationScore,
    pub selected: bool,
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub method: String,
    pub alpha: f64,
    pub seed: usize,
    pub model: HopfieldModel,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    pub cells: Vec<CellResult>,
    pub failures: Vec<CellFailure>,
    pub grid: Vec<GridRow>,
    pub models: Vec<TrainedModel>,
}

/// A concrete setting for one method.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub spec: MethodSpec,
    pub hopcpt: HopfieldConfig,
}

impl Candidate {
    pub fn describe(&self) -> String {
        let s = &self.spec;
        let c = s.method_config(0.5, 0).expect("validated");
        let mut out = match c.variant {
            MethodVariant::SplitCp => String::new(),
            MethodVariant::NexCp => format!("rho={}", c.nexcp_rho),
            MethodVariant::EnbPi => format!("window={}", c.enbpi_window),
            MethodVariant::KnnCp => format!("share={}", c.knn_top_share),
            MethodVariant::HopCpt => {
                let h = &self.hopcpt;
                format!("lr={};dropout={};time={}", h.learning_rate, h.dropout, h.time_encoding)
            }
        };
        if let Some(a) = s.adaptive {
            if !out.is_empty() {
                out.push(';');
            }
            out.push_str(&format!("aci={:?};gamma={}", a.mode, a.gamma).to_ascii_lowercase());
        }
        out
    }
}

/// Candidates searched by `grid` for a method, in a fixed order.
pub fn grid_candidates(spec: &MethodSpec, hopcpt: &HopfieldConfig) -> Result<Vec<Candidate>, CliError> {
    let base = Candidate { spec: spec.clone(), hopcpt: hopcpt.clone() };
    let mut cands: Vec<Candidate> = match spec.variant()? {
        MethodVariant::SplitCp => vec![base],
        MethodVariant::NexCp => spec
            .nexcp_grid()
            .into_iter()
            .map(|v| {
                let mut c = base.clone();
                c.spec.nexcp_rho = Some(v);
                c
            })
            .collect(),
        MethodVariant::EnbPi => spec
            .enbpi_grid()
            .into_iter()
            .map(|v| {
                let mut c = base.clone();
                c.spec.enbpi_window = Some(v);
                c
            })
            .collect(),
        MethodVariant::KnnCp => spec
            .knn_grid()
            .into_iter()
            .map(|v| {
                let mut c = base.clone();
                c.spec.knn_top_share = Some(v);
                c
            })
            .collect(),
        MethodVariant::HopCpt => {
            let mut out = Vec::new();
            for lr in spec.learning_rate_grid() {
                for dropout in spec.dropout_grid() {
                    for time in spec.time_encoding_grid() {
                        let mut c = base.clone();
                        c.hopcpt.learning_rate = lr;
                        c.hopcpt.dropout = dropout;
                        c.hopcpt.time_encoding = time;
                        out.push(c);
                    }
                }
            }
            out
        }
    };
    let adaptive = spec.adaptive_grid();
    if !adaptive.is_empty() {
        cands = cands
            .into_iter()
            .flat_map(|c| {
                adaptive.iter().map(move |&a| {
                    let mut c = c.clone();
                    c.spec.adaptive = Some(a);
                    c
                })
            })
            .collect();
    }
    for c in &cands {
        c.spec.method_config(0.5, 0)?;
    }
    if cands.is_empty() {
        return Err(CliError::Config(format!("method `{}` has an empty grid", spec.label())));
    }
    Ok(cands)
}

fn adaptive_state(spec: Option<AdaptiveSpec>, alpha: f64) -> Result<Option<AdaptiveState>, CliError> {
    spec.map(|a| AdaptiveState::new(alpha, a.gamma, a.mode.into())).transpose().map_err(CliError::from)
}

/// Trains the retrieval model on the calibration segment. The seed depends
/// only on the repetition, so every alpha and grid point starts from the
/// same initialization.
pub fn train_hopfield(
    data: &PreparedData,
    hopcpt: &HopfieldConfig,
    alpha: f64,
    run_seed: u64,
) -> Result<HopfieldModel, CliError> {
    let calib = data.split.calibration();
    let segment =
        CalibrationSegment::new(data.dataset.feature_rows(calib.clone()), data.dataset.errors()[calib].to_vec())?;
    let cfg = hopcpt.train_config(alpha, derive_seed(run_seed, &[label("hopcpt-train")]));
    Ok(train(&[segment], &cfg)?.model)
}

fn mean_width(intervals: &[PredictionInterval]) -> f64 {
    intervals.iter().map(PredictionInterval::width).sum::<f64>() / intervals.len() as f64
}

/// Validation score on the calibration segment: history is its first half,
/// queries its second half.
pub fn validation_score(
    data: &PreparedData,
    candidate: &Candidate,
    alpha: f64,
    method_seed: u64,
    model: Option<&HopfieldModel>,
) -> Result<ValidationScore, CliError> {
    let calib = data.split.calibration();
    let mid = calib.start + calib.len() / 2;
    let cfg = candidate.spec.method_config(alpha, method_seed)?;
    let queries: Range<usize> = mid..calib.end;
    let intervals = run_segment(
        &data.dataset,
        calib.start..mid,
        queries.clone(),
        &cfg,
        adaptive_state(candidate.spec.adaptive, alpha)?,
        model,
    )?;
    let dc = hopcpt_core::metrics::delta_cov(&intervals, &data.dataset.targets()[queries], alpha)?;
    Ok(ValidationScore::new(dc, mean_width(&intervals)))
}

struct UnitContext<'a> {
    cfg: &'a ExperimentConfig,
    data: &'a PreparedData,
    seed_index: usize,
    run_seed: u64,
    alpha: f64,
}

impl UnitContext<'_> {
    fn method_seed(&self, spec: &MethodSpec) -> u64 {
        derive_seed(self.run_seed, &[label("method"), label(&spec.label())])
    }

    fn test_cell(&self, candidate: &Candidate, model: Option<&HopfieldModel>) -> Result<CellResult, CliError> {
        let spec = &candidate.spec;
        let cfg = spec.method_config(self.alpha, self.method_seed(spec))?;
        let intervals =
            run_method(&self.data.dataset, &self.data.split, &cfg, adaptive_state(spec.adaptive, self.alpha)?, model)?;
        let test = self.data.split.test();
        let ds = &self.data.dataset;
        let targets = &ds.targets()[test.clone()];
        let mode = if self.cfg.rolling_windows { WindowMode::Rolling } else { WindowMode::Disjoint };
        let report = evaluate(&intervals, targets, self.alpha, &self.cfg.local_coverage_windows, mode)?;
        let method = spec.label();
        let rows = test
            .zip(&intervals)
            .map(|(i, pi)| IntervalRow {
                method: method.clone(),
                seed: self.seed_index,
                alpha: self.alpha,
                t: ds.timestamps()[i],
                y: ds.targets()[i],
                y_hat: ds.predictions()[i],
                alpha_used: pi.alpha(),
                lower: pi.lower(),
                upper: pi.upper(),
            })
            .collect();
        Ok(CellResult {
            method,
            alpha: self.alpha,
            seed: self.seed_index,
            params: candidate.describe(),
            report,
            intervals: rows,
        })
    }

    fn failure(&self, spec: &MethodSpec, e: CliError) -> CellFailure {
        CellFailure { method: spec.label(), alpha: self.alpha, seed: self.seed_index, message: e.to_string() }
    }

    /// Fixed configuration for every method.
    fn run(&self, out: &mut ExperimentOutput) {
        let mut model: Option<Result<HopfieldModel, String>> = None;
        for spec in &self.cfg.methods {
            let candidate = Candidate { spec: spec.clone(), hopcpt: self.cfg.hopcpt.clone() };
            let is_hop = matches!(spec.variant(), Ok(MethodVariant::HopCpt));
            let result = if is_hop {
                let m = model.get_or_insert_with(|| {
                    train_hopfield(self.data, &self.cfg.hopcpt, self.alpha, self.run_seed).map_err(|e| e.to_string())
                });
                match m {
                    Ok(m) => self.test_cell(&candidate, Some(m)).map(|c| (c, Some(m.clone()))),
                    Err(e) => Err(CliError::Data(format!("training failed: {e}"))),
                }
            } else {
                self.test_cell(&candidate, None).map(|c| (c, None))
            };
            self.record(spec, result, out);
        }
    }

    fn record(
        &self,
        spec: &MethodSpec,
        result: Result<(CellResult, Option<HopfieldModel>), CliError>,
        out: &mut ExperimentOutput,
    ) {
        match result {
            Ok((cell, m)) => {
                if let Some(model) = m {
                    out.models.push(TrainedModel {
                        method: cell.method.clone(),
                        alpha: self.alpha,
                        seed: self.seed_index,
                        model,
                    });
                }
                out.cells.push(cell);
            }
            Err(e) => out.failures.push(self.failure(spec, e)),
        }
    }

    /// Selects each method's setting on the calibration segment, then
    /// evaluates the selected setting on the test segment.
    fn grid(&self, out: &mut ExperimentOutput) {
        let mut trained: Vec<(HopfieldConfig, HopfieldModel)> = Vec::new();
        for spec in &self.cfg.methods {
            let result = self.grid_method(spec, &mut trained, out);
            self.record(spec, result, out);
        }
    }

    fn grid_method(
        &self,
        spec: &MethodSpec,
        trained: &mut Vec<(HopfieldConfig, HopfieldModel)>,
        out: &mut ExperimentOutput,
    ) -> Result<(CellResult, Option<HopfieldModel>), CliError> {
        let candidates = grid_candidates(spec, &self.cfg.hopcpt)?;
        let is_hop = spec.variant()? == MethodVariant::HopCpt;
        let mut models = Vec::with_capacity(candidates.len());
        let mut scores = Vec::with_capacity(candidates.len());
        for c in &candidates {
            let model = if is_hop {
                let found = trained.iter().find(|(h, _)| *h == c.hopcpt).map(|(_, m)| m.clone());
                let m = match found {
                    Some(m) => m,
                    None => {
                        let m = train_hopfield(self.data, &c.hopcpt, self.alpha, self.run_seed)?;
                        trained.push((c.hopcpt.clone(), m.clone()));
                        m
                    }
                };
                Some(m)
            } else {
                None
            };
            scores.push(validation_score(self.data, c, self.alpha, self.method_seed(spec), model.as_ref())?);
            models.push(model);
        }
        let best = select_model(&scores)?;
        for (i, (c, s)) in candidates.iter().zip(&scores).enumerate() {
            out.grid.push(GridRow {
                method: spec.label(),
                alpha: self.alpha,
                seed: self.seed_index,
                candidate: i,
                params: c.describe(),
                score: *s,
                selected: i == best,
            });
        }
        let model = models.swap_remove(best);
        let cell = self.test_cell(&candidates[best], model.as_ref())?;
        Ok((cell, model))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Run,
    Grid,
}

/// Runs every (repetition, alpha) unit. Data errors fail the whole unit;
/// method errors fail only their cell.
pub fn execute(cfg: &ExperimentConfig, mode: Mode) -> Result<ExperimentOutput, CliError> {
    cfg.validate()?;
    let units: Vec<(usize, usize)> = (0..cfg.seeds).flat_map(|s| (0..cfg.alphas.len()).map(move |a| (s, a))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let data: Vec<Result<PreparedData, String>> = pool
        .install(|| (0..cfg.seeds).into_par_iter().map(|s| prepare_data(cfg, s).map_err(|e| e.to_string())).collect());
    // Configuration problems surface before any work is wasted.
    if let DataSource::Csv = cfg.data.source {
        if let Err(e) = &data[0] {
            return Err(CliError::Data(e.clone()));
        }
    }
    let parts: Vec<ExperimentOutput> = pool.install(|| {
        units
            .par_iter()
            .map(|&(s, a)| {
                let mut out = ExperimentOutput::default();
                let alpha = cfg.alphas[a];
                match &data[s] {
                    Ok(d) => {
                        let ctx =
                            UnitContext { cfg, data: d, seed_index: s, run_seed: run_seed(cfg.master_seed, s), alpha };
                        match mode {
                            Mode::Run => ctx.run(&mut out),
                            Mode::Grid => ctx.grid(&mut out),
                        }
                    }
                    Err(e) => {
                        for spec in &cfg.methods {
                            out.failures.push(CellFailure { method: spec.label(), alpha, seed: s, message: e.clone() });
                        }
                    }
                }
                out
            })
            .collect()
    });
    let mut out = ExperimentOutput::default();
    for p in parts {
        out.cells.extend(p.cells);
        out.failures.extend(p.failures);
        out.grid.extend(p.grid);
        out.models.extend(p.models);
    }
    Ok(out)
}
