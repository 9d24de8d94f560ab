//! The shared encoder-decoder and its five structural variants.

mod checkpoint;
mod config;
mod forward;
mod params;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use config::{Architecture, ModelConfig};
pub use forward::{
    attention_semantic, attention_structural, combine_two_way_relation, combine_two_way_word,
    coverage_step, decode_step, encode, initial_state, mix_copy_distribution, relation_matrices,
    CopyMap, DecoderState, EncoderOutput, StepOutput,
};
pub use params::{audit_shapes, init_params, param_specs, ParamSpec};

use crate::autodiff::ParamSet;
use crate::error::Result;

/// A configuration together with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    config: ModelConfig,
    params: ParamSet,
}

impl Model {
    /// Freshly initialised parameters.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        let params = init_params(&config, seed)?;
        Ok(Model { config, params })
    }

    /// Wraps existing parameters after a shape audit.
    pub fn from_params(config: ModelConfig, params: ParamSet) -> Result<Self> {
        config.validate()?;
        audit_shapes(&config, &params)?;
        Ok(Model { config, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Current value of the mixing coefficient, for two-way variants.
    pub fn epsilon(&self) -> Option<f64> {
        if !self.config.architecture.is_two_way() {
            return None;
        }
        Some(match self.config.fixed_epsilon {
            Some(e) => e,
            None => {
                let raw = self.params.by_name("eps.raw")?.item();
                raw.max(0.0) + (-raw.abs()).exp().ln_1p()
            }
        })
    }
}
