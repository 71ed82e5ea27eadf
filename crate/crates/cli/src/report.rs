//! Result tables.
//!
//! `per_seed.csv` has one row per (method, alpha, repetition); `summary.csv`
//! aggregates it per (method, alpha) with the mean and the sample standard
//! deviation (zero for a single repetition). Local coverage columns are
//! empty when the window is longer than the test segment.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use hopcpt_core::metrics::{evaluate, WindowMode};
use hopcpt_core::EvalReport;

use crate::checkpoint;
use crate::csvio::{finish, read_intervals, write_intervals, IntervalRow};
use crate::experiment::{ExperimentOutput, GridRow};
use crate::{write_atomic, CliError};

/// Metrics of one (method, alpha, repetition) cell as written to `per_seed.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedRow {
    pub method: String,
    pub alpha: f64,
    pub seed: usize,
    pub params: String,
    pub report: EvalReport,
}

const METRICS: [&str; 5] = ["delta_cov", "pi_width", "winkler", "norm_pi_width", "norm_winkler"];

fn metric_values(r: &EvalReport, windows: &[usize]) -> Vec<Option<f64>> {
    let mut v = vec![
        Some(r.delta_cov),
        Some(r.mean_pi_width),
        Some(r.mean_winkler),
        Some(r.normalized_pi_width()),
        Some(r.normalized_winkler()),
    ];
    v.extend(windows.iter().map(|k| r.local_coverage.get(k).copied()));
    v
}

fn metric_names(windows: &[usize]) -> Vec<String> {
    METRICS.iter().map(|s| s.to_string()).chain(windows.iter().map(|k| format!("local_cov_{k}"))).collect()
}

fn fmt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn per_seed_csv(rows: &[SeedRow], windows: &[usize]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["method", "alpha", "seed"].iter().map(|s| s.to_string()).collect();
    header.extend(metric_names(windows));
    header.extend(["n_test".to_string(), "params".to_string()]);
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.method.clone(), r.alpha.to_string(), r.seed.to_string()];
        rec.extend(metric_values(&r.report, windows).into_iter().map(fmt));
        rec.extend([r.report.n_test.to_string(), r.params.clone()]);
        w.write_record(&rec)?;
    }
    finish(w)
}

/// Mean and sample standard deviation of the present values.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Some((mean, var.sqrt()))
}

/// One aggregated row: method, alpha, number of repetitions and
/// (mean, std) per metric.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub alpha: f64,
    pub n_seeds: usize,
    pub stats: Vec<Option<(f64, f64)>>,
}

/// Groups rows by (method, alpha) in order of first appearance.
pub fn summarize(rows: &[SeedRow], windows: &[usize]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, u64)> = Vec::new();
    let mut groups: BTreeMap<(String, u64), Vec<&SeedRow>> = BTreeMap::new();
    for r in rows {
        let key = (r.method.clone(), r.alpha.to_bits());
        if !groups.contains_key(&key) {
            keys.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    keys.into_iter()
        .map(|key| {
            let g = &groups[&key];
            let per_metric: Vec<Vec<Option<f64>>> = g.iter().map(|r| metric_values(&r.report, windows)).collect();
            let n_metrics = METRICS.len() + windows.len();
            let stats =
                (0..n_metrics).map(|j| mean_std(&per_metric.iter().filter_map(|v| v[j]).collect::<Vec<_>>())).collect();
            SummaryRow { method: key.0, alpha: f64::from_bits(key.1), n_seeds: g.len(), stats }
        })
        .collect()
}

pub fn summary_csv(rows: &[SummaryRow], windows: &[usize]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["method", "alpha", "n_seeds"].iter().map(|s| s.to_string()).collect();
    for m in metric_names(windows) {
        header.push(format!("{m}_mean"));
        header.push(format!("{m}_std"));
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.method.clone(), r.alpha.to_string(), r.n_seeds.to_string()];
        for s in &r.stats {
            rec.push(fmt(s.map(|x| x.0)));
            rec.push(fmt(s.map(|x| x.1)));
        }
        w.write_record(&rec)?;
    }
    finish(w)
}

pub fn grid_csv(rows: &[GridRow]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "alpha", "seed", "candidate", "params", "val_delta_cov", "val_pi_width", "selected"])?;
    for r in rows {
        w.write_record([
            r.method.clone(),
            r.alpha.to_string(),
            r.seed.to_string(),
            r.candidate.to_string(),
            r.params.clone(),
            r.score.delta_cov.to_string(),
            r.score.pi_width.to_string(),
            u8::from(r.selected).to_string(),
        ])?;
    }
    finish(w)
}

pub fn interval_file_name(method: &str, alpha: f64, seed: usize) -> String {
    format!("{method}_alpha{alpha}_seed{seed}.csv")
}

pub fn checkpoint_file_name(method: &str, alpha: f64, seed: usize) -> String {
    format!("{method}_alpha{alpha}_seed{seed}.json")
}

/// Writes every table of an experiment into `dir`.
pub fn write_experiment(dir: &Path, out: &ExperimentOutput, windows: &[usize]) -> Result<(), CliError> {
    let rows: Vec<SeedRow> = out
        .cells
        .iter()
        .map(|c| SeedRow {
            method: c.method.clone(),
            alpha: c.alpha,
            seed: c.seed,
            params: c.params.clone(),
            report: c.report.clone(),
        })
        .collect();
    write_atomic(&dir.join("per_seed.csv"), &per_seed_csv(&rows, windows)?)?;
    write_atomic(&dir.join("summary.csv"), &summary_csv(&summarize(&rows, windows), windows)?)?;
    if !out.grid.is_empty() {
        write_atomic(&dir.join("grid.csv"), &grid_csv(&out.grid)?)?;
    }
    for c in &out.cells {
        write_intervals(&dir.join("intervals").join(interval_file_name(&c.method, c.alpha, c.seed)), &c.intervals)?;
    }
    for m in &out.models {
        checkpoint::save(&dir.join("checkpoints").join(checkpoint_file_name(&m.method, m.alpha, m.seed)), &m.model)?;
    }
    if !out.failures.is_empty() {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["method", "alpha", "seed", "error"])?;
        for f in &out.failures {
            w.write_record([f.method.clone(), f.alpha.to_string(), f.seed.to_string(), f.message.clone()])?;
        }
        write_atomic(&dir.join("failures.csv"), &finish(w)?)?;
    }
    Ok(())
}

/// Recomputes per-seed metrics from interval files, sorted by method, alpha
/// and repetition.
pub fn evaluate_interval_files(
    files: &[PathBuf],
    windows: &[usize],
    mode: WindowMode,
) -> Result<Vec<SeedRow>, CliError> {
    let mut groups: BTreeMap<(String, u64, usize), Vec<IntervalRow>> = BTreeMap::new();
    for f in files {
        for r in read_intervals(f)? {
            groups.entry((r.method.clone(), r.alpha.to_bits(), r.seed)).or_default().push(r);
        }
    }
    let mut out = Vec::with_capacity(groups.len());
    for ((method, alpha_bits, seed), mut rows) in groups {
        rows.sort_by_key(|r| r.t);
        let alpha = f64::from_bits(alpha_bits);
        let intervals = rows.iter().map(IntervalRow::interval).collect::<Result<Vec<_>, _>>()?;
        let targets: Vec<f64> = rows.iter().map(|r| r.y).collect();
        let report = evaluate(&intervals, &targets, alpha, windows, mode)?;
        out.push(SeedRow { method, alpha, seed, params: String::new(), report });
    }
    out.sort_by(|a, b| a.method.cmp(&b.method).then(a.alpha.total_cmp(&b.alpha)).then(a.seed.cmp(&b.seed)));
    Ok(out)
}
