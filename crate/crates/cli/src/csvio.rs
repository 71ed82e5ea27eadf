//! CSV series and interval files.
//!
//! Series files have a header with `t` (integer, strictly increasing), `y`,
//! optionally `y_hat`, and feature columns `x0`, `x1`, ... Other columns are
//! ignored. Floats are written with shortest round-trip formatting.

use std::path::Path;

use hopcpt_core::basemodel::{Regime, RegimeSeries};
use hopcpt_core::{Matrix, PredictionInterval};

use crate::{write_atomic, CliError};

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable {
    pub timestamps: Vec<i64>,
    pub targets: Vec<f64>,
    pub predictions: Option<Vec<f64>>,
    pub features: Matrix,
}

fn parse_f64(field: &str, col: &str, row: usize) -> Result<f64, CliError> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| CliError::Data(format!("row {}: column `{col}` is not a number: {field:?}", row + 1)))
}

pub fn read_series(path: &Path) -> Result<SeriesTable, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    read_series_from(file).map_err(|e| match e {
        CliError::Data(m) => CliError::Data(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn read_series_from<R: std::io::Read>(reader: R) -> Result<SeriesTable, CliError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let t_col = find("t").ok_or_else(|| CliError::Data("missing column `t`".into()))?;
    let y_col = find("y").ok_or_else(|| CliError::Data("missing column `y`".into()))?;
    let yhat_col = find("y_hat");
    let x_cols: Vec<usize> = (0..).map_while(|j| find(&format!("x{j}"))).collect();
    if x_cols.is_empty() {
        return Err(CliError::Data("no feature columns (x0, x1, ...)".into()));
    }

    let (mut ts, mut ys, mut yh, mut xs) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let t = rec[t_col]
            .parse::<i64>()
            .map_err(|_| CliError::Data(format!("row {}: `t` must be an integer", row + 1)))?;
        ts.push(t);
        ys.push(parse_f64(&rec[y_col], "y", row)?);
        if let Some(c) = yhat_col {
            yh.push(parse_f64(&rec[c], "y_hat", row)?);
        }
        for (j, &c) in x_cols.iter().enumerate() {
            xs.push(parse_f64(&rec[c], &format!("x{j}"), row)?);
        }
    }
    if ts.is_empty() {
        return Err(CliError::Data("no data rows".into()));
    }
    let features = Matrix::from_row_slice(ts.len(), x_cols.len(), &xs);
    Ok(SeriesTable { timestamps: ts, targets: ys, predictions: yhat_col.map(|_| yh), features })
}

/// Generator output: `t,y,x0,regime`.
pub fn write_regime_series(path: &Path, series: &RegimeSeries) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "y", "x0", "regime"])?;
    for i in 0..series.len() {
        let regime = match series.regimes[i] {
            Regime::Low => "low",
            Regime::High => "high",
        };
        w.write_record([
            series.timestamps[i].to_string(),
            series.targets[i].to_string(),
            series.features[(i, 0)].to_string(),
            regime.to_string(),
        ])?;
    }
    write_atomic(path, &finish(w)?)
}

pub(crate) fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>, CliError> {
    w.into_inner().map_err(|e| CliError::Data(format!("csv buffer: {e}")))
}

/// One row of an interval file.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalRow {
    pub method: String,
    pub seed: usize,
    pub alpha: f64,
    pub t: i64,
    pub y: f64,
    pub y_hat: f64,
    pub alpha_used: f64,
    pub lower: f64,
    pub upper: f64,
}

impl IntervalRow {
    pub fn interval(&self) -> Result<PredictionInterval, CliError> {
        Ok(PredictionInterval::new(self.lower, self.upper, self.alpha_used)?)
    }
}

const INTERVAL_HEADER: [&str; 10] =
    ["method", "seed", "alpha", "t", "y", "y_hat", "alpha_used", "lower", "upper", "covered"];

pub fn write_intervals(path: &Path, rows: &[IntervalRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(INTERVAL_HEADER)?;
    for r in rows {
        let covered = r.lower <= r.y && r.y <= r.upper;
        w.write_record([
            r.method.clone(),
            r.seed.to_string(),
            r.alpha.to_string(),
            r.t.to_string(),
            r.y.to_string(),
            r.y_hat.to_string(),
            r.alpha_used.to_string(),
            r.lower.to_string(),
            r.upper.to_string(),
            u8::from(covered).to_string(),
        ])?;
    }
    write_atomic(path, &finish(w)?)
}

pub fn read_intervals(path: &Path) -> Result<Vec<IntervalRow>, CliError> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    if rdr.headers()?.iter().ne(INTERVAL_HEADER) {
        return Err(CliError::Data(format!("{}: not an interval file", path.display())));
    }
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |i: usize| parse_f64(&rec[i], INTERVAL_HEADER[i], row);
        let int = |i: usize| {
            rec[i].parse::<i64>().map_err(|_| CliError::Data(format!("row {}: bad `{}`", row + 1, INTERVAL_HEADER[i])))
        };
        out.push(IntervalRow {
            method: rec[0].to_string(),
            seed: int(1)? as usize,
            alpha: num(2)?,
            t: int(3)?,
            y: num(4)?,
            y_hat: num(5)?,
            alpha_used: num(6)?,
            lower: num(7)?,
            upper: num(8)?,
        });
    }
    Ok(out)
}
