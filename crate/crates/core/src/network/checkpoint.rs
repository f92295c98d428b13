//! Versioned JSON checkpoint of network weights and training config.
//!
//! Layout:
//!
//! ```json
//! {
//!   "format": "evidal-checkpoint",
//!   "version": 1,
//!   "activation": "relu",
//!   "layers": [ { "fan_in": 4, "fan_out": 64, "weights": [...], "bias": [...] }, ... ],
//!   "train_config": { ... }
//! }
//! ```
//!
//! `weights` is row-major with `fan_in` rows. Floats are written in shortest
//! round-trip form and parsed exactly, so save → load is bit-exact.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Activation, Dense, NetworkParams, TrainConfig};
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "evidal-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: NetworkParams,
    pub train_config: TrainConfig,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerRepr {
    fan_in: usize,
    fan_out: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointRepr {
    format: String,
    version: u32,
    activation: Activation,
    layers: Vec<LayerRepr>,
    train_config: TrainConfig,
}

impl Checkpoint {
    pub fn to_json(&self) -> Result<String> {
        if !self.params.is_finite() {
            return Err(Error::Checkpoint("refusing to save non-finite parameters".into()));
        }
        let repr = CheckpointRepr {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            activation: self.params.activation,
            layers: self
                .params
                .layers
                .iter()
                .map(|l| LayerRepr {
                    fan_in: l.weights.nrows(),
                    fan_out: l.weights.ncols(),
                    weights: l.weights.iter().copied().collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
            train_config: self.train_config.clone(),
        };
        Ok(serde_json::to_string_pretty(&repr)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let repr: CheckpointRepr = serde_json::from_str(text)?;
        if repr.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown format `{}`", repr.format)));
        }
        if repr.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", repr.version)));
        }
        if repr.layers.is_empty() {
            return Err(Error::Checkpoint("no layers".into()));
        }
        let mut layers = Vec::with_capacity(repr.layers.len());
        let mut prev_out = None;
        for (i, l) in repr.layers.into_iter().enumerate() {
            if prev_out.is_some_and(|p| p != l.fan_in) {
                return Err(Error::Checkpoint(format!("layer {i} fan_in does not chain")));
            }
            if l.bias.len() != l.fan_out {
                return Err(Error::Checkpoint(format!("layer {i} bias length")));
            }
            let weights = Array2::from_shape_vec((l.fan_in, l.fan_out), l.weights)
                .map_err(|e| Error::Checkpoint(format!("layer {i}: {e}")))?;
            prev_out = Some(l.fan_out);
            layers.push(Dense {
                weights,
                bias: Array1::from(l.bias),
            });
        }
        let params = NetworkParams {
            layers,
            activation: repr.activation,
        };
        if !params.is_finite() {
            return Err(Error::Checkpoint("non-finite parameters".into()));
        }
        Ok(Self {
            params,
            train_config: repr.train_config,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}
