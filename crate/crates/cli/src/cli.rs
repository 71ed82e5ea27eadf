//! Command-line interface.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use hopcpt_core::basemodel::generate_regime_series;
use hopcpt_core::metrics::WindowMode;

use crate::config::ExperimentConfig;
use crate::csvio::write_regime_series;
use crate::experiment::{execute, Mode};
use crate::report::{evaluate_interval_files, per_seed_csv, summarize, summary_csv, write_experiment};
use crate::{write_atomic, CliError};

#[derive(Debug, Parser)]
#[command(name = "hopcpt", version, about = "Conformal prediction intervals for time series")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic regime-switching series to CSV.
    Generate(GenerateArgs),
    /// Run every configured method with fixed settings.
    Run(ExperimentArgs),
    /// Select each method's setting on the calibration segment, then evaluate it.
    Grid(ExperimentArgs),
    /// Recompute metrics from interval files.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
    /// Read generator parameters from `[data.synthetic]` of this config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Generator seed (overrides the config).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of steps (overrides the config).
    #[arg(long)]
    pub steps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// TOML experiment config; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Number of repetitions.
    #[arg(long)]
    pub seeds: Option<usize>,
    #[arg(long)]
    pub master_seed: Option<u64>,
    /// Comma-separated miscoverage levels.
    #[arg(long, value_delimiter = ',')]
    pub alpha: Option<Vec<f64>>,
    /// Comma-separated method labels to keep.
    #[arg(long, value_delimiter = ',')]
    pub method: Option<Vec<String>>,
    /// Worker threads.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Results directory holding `intervals/`, or a single interval file.
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory; defaults to the input directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated local coverage window sizes.
    #[arg(long, value_delimiter = ',', default_value = "10,20,50")]
    pub windows: Vec<usize>,
    /// Use every window start instead of disjoint windows.
    #[arg(long)]
    pub rolling: bool,
}

impl ExperimentArgs {
    pub fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if let Some(s) = self.seeds {
            cfg.seeds = s;
        }
        if let Some(s) = self.master_seed {
            cfg.master_seed = s;
        }
        if let Some(a) = &self.alpha {
            cfg.alphas = a.clone();
        }
        if let Some(j) = self.jobs {
            cfg.jobs = j;
        }
        if let Some(keep) = &self.method {
            for k in keep {
                if !cfg.methods.iter().any(|m| &m.label() == k || &m.name == k) {
                    return Err(CliError::Config(format!("no configured method `{k}`")));
                }
            }
            cfg.methods.retain(|m| keep.iter().any(|k| k == &m.label() || k == &m.name));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn generate(args: &GenerateArgs) -> Result<(), CliError> {
    let cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let mut gen = cfg.data.synthetic.generator(args.seed.unwrap_or(cfg.data.synthetic.seed));
    if let Some(n) = args.steps {
        gen.total_steps = n;
    }
    gen.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let series = generate_regime_series(&gen)?;
    write_regime_series(&args.out, &series)?;
    eprintln!("wrote {} steps to {}", series.len(), args.out.display());
    Ok(())
}

/// Runs an experiment and writes its tables. Returns the number of failed cells.
pub fn experiment(cfg: &ExperimentConfig, mode: Mode) -> Result<usize, CliError> {
    let out = execute(cfg, mode)?;
    let dir = &cfg.output_dir;
    write_experiment(dir, &out, &cfg.local_coverage_windows)?;
    write_atomic(&dir.join("config.toml"), cfg.to_toml().as_bytes())?;
    for f in &out.failures {
        eprintln!("failed: {} alpha={} seed={}: {}", f.method, f.alpha, f.seed, f.message);
    }
    eprintln!(
        "{} cells, {} failed; results in {}",
        out.cells.len() + out.failures.len(),
        out.failures.len(),
        dir.display()
    );
    Ok(out.failures.len())
}

fn interval_files(input: &Path) -> Result<Vec<PathBuf>, CliError> {
    if input.is_file() {
        return Ok(vec![input.to_path_buf()]);
    }
    let dir = input.join("intervals");
    let mut files = Vec::new();
    for entry in std::fs::read_dir(&dir).map_err(|e| CliError::io(&dir, e))? {
        let p = entry.map_err(|e| CliError::io(&dir, e))?.path();
        if p.extension().is_some_and(|e| e == "csv") {
            files.push(p);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(CliError::Data(format!("no interval files in {}", dir.display())));
    }
    Ok(files)
}

fn eval(args: &EvalArgs) -> Result<(), CliError> {
    let files = interval_files(&args.input)?;
    let mode = if args.rolling { WindowMode::Rolling } else { WindowMode::Disjoint };
    let rows = evaluate_interval_files(&files, &args.windows, mode)?;
    let out = match &args.out {
        Some(o) => o.clone(),
        None if args.input.is_file() => args.input.parent().unwrap_or(Path::new(".")).to_path_buf(),
        None => args.input.clone(),
    };
    write_atomic(&out.join("eval_per_seed.csv"), &per_seed_csv(&rows, &args.windows)?)?;
    write_atomic(&out.join("eval_summary.csv"), &summary_csv(&summarize(&rows, &args.windows), &args.windows)?)?;
    eprintln!("evaluated {} series from {} files into {}", rows.len(), files.len(), out.display());
    Ok(())
}

/// Exit status: 0 on success, 1 when any cell or IO step failed, 2 for
/// invalid configuration or arguments.
pub fn run(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Generate(a) => generate(a).map(|_| 0),
        Command::Run(a) => a.resolve().and_then(|c| experiment(&c, Mode::Run)),
        Command::Grid(a) => a.resolve().and_then(|c| experiment(&c, Mode::Grid)),
        Command::Eval(a) => eval(a).map(|_| 0),
    };
    match result {
        Ok(0) => 0,
        Ok(_) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
