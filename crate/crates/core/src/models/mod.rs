//! Forecasting models: the multi-scale mixer and the two linear baselines,
//! all channel-independent behind one trait.

pub mod baselines;
pub mod checkpoint;
pub mod msmixer;
pub mod revin;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::numerics::{ParamStore, RunRng, Stream, Tensor2D};

pub use baselines::{DLinear, DLinearConfig, NLinear, NLinearConfig};
pub use msmixer::{MsMixer, MsMixerConfig};

/// Per-module parameter accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBreakdown {
    pub rows: Vec<(String, usize)>,
    pub total: usize,
}

/// A trainable channel-independent forecaster.
///
/// `forward` consumes inputs in the (B·N, T) row layout and produces (B·N, H)
/// predictions; it records the activations `backward` needs, which in turn
/// accumulates parameter gradients into the store.
pub trait Forecaster: Send {
    fn forward(&mut self, inputs: &Tensor2D, training: bool, rng: &mut RunRng) -> Result<Tensor2D>;
    fn backward(&mut self, d_pred: &Tensor2D) -> Result<()>;
    fn store(&self) -> &ParamStore;
    fn store_mut(&mut self) -> &mut ParamStore;
    fn param_breakdown(&self) -> ParamBreakdown;
    /// Converged softmax gate weights as (scale, weight) pairs, if the model has a gate.
    fn gate_weights(&self) -> Option<Vec<(usize, f64)>>;
    /// σ(α̃), if the model fuses two pathways.
    fn fusion_alpha(&self) -> Option<f64>;
    /// σ(w̃), if the model blends trend/seasonal projections.
    fn trend_blend(&self) -> Option<f64>;
    fn model_config(&self) -> ModelConfig;
}

/// Exact integer parameter counts, per module and total.
pub fn count_params(model: &dyn Forecaster) -> ParamBreakdown {
    model.param_breakdown()
}

/// Serializable model description; enough to rebuild the graph for a
/// checkpoint load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    MsMixer(MsMixerConfig),
    DLinear(DLinearConfig),
    NLinear(NLinearConfig),
}

impl ModelConfig {
    /// Build the model with freshly initialised parameters; init draws come
    /// from the seed's init stream.
    pub fn build(&self, seed: u64) -> Result<Box<dyn Forecaster>> {
        let mut rng = RunRng::new(seed, Stream::Init);
        Ok(match self {
            ModelConfig::MsMixer(cfg) => Box::new(MsMixer::new(cfg.clone(), &mut rng)?),
            ModelConfig::DLinear(cfg) => Box::new(DLinear::new(cfg.clone(), &mut rng)?),
            ModelConfig::NLinear(cfg) => Box::new(NLinear::new(cfg.clone(), &mut rng)?),
        })
    }

    pub fn horizon(&self) -> usize {
        match self {
            ModelConfig::MsMixer(c) => c.horizon,
            ModelConfig::DLinear(c) => c.horizon,
            ModelConfig::NLinear(c) => c.horizon,
        }
    }

    pub fn lookback(&self) -> usize {
        match self {
            ModelConfig::MsMixer(c) => c.lookback,
            ModelConfig::DLinear(c) => c.lookback,
            ModelConfig::NLinear(c) => c.lookback,
        }
    }
}
