//! Inference-time retrieval against a growing memory of past steps.

use alloc::vec::Vec;
use core::ops::Range;

use super::{encoder_pass, HopfieldModel};
use crate::data::{normalize_weights, Matrix, WeightVector};
use crate::error::{check_len, invalid, Result};

/// Precomputed query/key projections of every row of a feature matrix,
/// with the time channel split out so that relative positions can be
/// assigned per query.
///
/// For a memory of `n` rows the `i`-th memory row (0-based) gets time value
/// `(i + 1) / (n + 1)` and the query gets `1`.
#[derive(Debug, Clone)]
pub struct EncodedMemory {
    query_body: Matrix,
    key_body: Matrix,
    query_time: Vec<f64>,
    key_time: Vec<f64>,
    beta: f64,
    use_time: bool,
}

impl EncodedMemory {
    pub fn new(model: &HopfieldModel, features: &Matrix) -> Result<Self> {
        check_len(model.shape().input, features.ncols())?;
        let zeros = alloc::vec![0.0; features.nrows()];
        let enc = encoder_pass(model, features, &zeros, None).encoded;
        let p = &model.params;
        let w = p.wq.ncols() - 1;
        let body = enc.columns(0, w);
        Ok(Self {
            query_body: body * p.wq.columns(0, w).transpose(),
            key_body: body * p.wk.columns(0, w).transpose(),
            query_time: p.wq.column(w).iter().copied().collect(),
            key_time: p.wk.column(w).iter().copied().collect(),
            beta: model.beta,
            use_time: model.use_time_encoding,
        })
    }

    pub fn len(&self) -> usize {
        self.query_body.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.query_body.nrows() == 0
    }

    /// Association weights of row `query` over the rows in `memory`.
    pub fn weights(&self, query: usize, memory: Range<usize>) -> Result<WeightVector> {
        if memory.is_empty() {
            return Err(invalid("retrieval memory is empty"));
        }
        if query >= self.len() || memory.end > self.len() {
            return Err(invalid("retrieval row out of range"));
        }
        let n = memory.len() as f64;
        let mut q: Vec<f64> = self.query_body.row(query).iter().copied().collect();
        if self.use_time {
            for (qi, t) in q.iter_mut().zip(&self.query_time) {
                *qi += t;
            }
        }
        let q_dot_time: f64 = q.iter().zip(&self.key_time).map(|(a, b)| a * b).sum();
        let logits: Vec<f64> = memory
            .clone()
            .enumerate()
            .map(|(pos, row)| {
                let body: f64 = self.key_body.row(row).iter().zip(&q).map(|(k, q)| k * q).sum();
                let time = if self.use_time { (pos + 1) as f64 / (n + 1.0) } else { 0.0 };
                self.beta * (body + time * q_dot_time)
            })
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let raw: Vec<f64> = logits.iter().map(|l| libm::exp(l - max)).collect();
        normalize_weights(&raw)
    }
}
