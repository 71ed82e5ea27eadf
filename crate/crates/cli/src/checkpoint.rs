//! JSON checkpoints of trained retrieval models.

use std::path::Path;

use hopcpt_core::hopfield::{ModelShape, Params};
use hopcpt_core::HopfieldModel;
use serde::{Deserialize, Serialize};

use crate::{write_atomic, CliError};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Tensors are stored column-major in the order w1, b1, w2, b2, wq, wk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub input: usize,
    pub hidden: usize,
    pub encoding: usize,
    pub attention: usize,
    pub beta: f64,
    pub dropout: f64,
    pub time_encoding: bool,
    pub tensors: Vec<Vec<f64>>,
}

impl Checkpoint {
    pub fn from_model(model: &HopfieldModel) -> Self {
        let s = model.shape();
        Self {
            schema_version: CHECKPOINT_VERSION,
            input: s.input,
            hidden: s.hidden,
            encoding: s.encoding,
            attention: s.attention,
            beta: model.beta,
            dropout: model.dropout_rate,
            time_encoding: model.use_time_encoding,
            tensors: model.params.tensors().iter().map(|t| t.to_vec()).collect(),
        }
    }

    pub fn into_model(self) -> Result<HopfieldModel, CliError> {
        if self.schema_version != CHECKPOINT_VERSION {
            return Err(CliError::Data(format!("unsupported checkpoint version {}", self.schema_version)));
        }
        let shape = ModelShape::new(self.input, self.hidden, self.encoding, self.attention);
        let mut params = Params::zeros(shape);
        if self.tensors.len() != 6 {
            return Err(CliError::Data("checkpoint must hold 6 tensors".into()));
        }
        for (dst, src) in params.tensors_mut().into_iter().zip(&self.tensors) {
            if dst.len() != src.len() {
                return Err(CliError::Data("checkpoint tensor size does not match its shape".into()));
            }
            dst.copy_from_slice(src);
        }
        Ok(HopfieldModel::new(params, self.beta, self.dropout, self.time_encoding)?)
    }
}

pub fn save(path: &Path, model: &HopfieldModel) -> Result<(), CliError> {
    let json = serde_json::to_vec_pretty(&Checkpoint::from_model(model))?;
    write_atomic(path, &json)
}

pub fn load(path: &Path) -> Result<HopfieldModel, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_slice::<Checkpoint>(&bytes)?.into_model()
}
