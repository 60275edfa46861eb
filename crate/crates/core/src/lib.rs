//! Multi-scale MLP forecaster for long-term time series, its two linear
//! baselines, and the full desk-scale benchmark protocol: dense f64 kernels
//! with hand-derived reverse-mode gradients, ETT-style data handling, AdamW
//! training with plateau scheduling and early stopping, and deterministic
//! run reports.

pub mod data;
pub mod error;
pub mod models;
pub mod numerics;
pub mod optim;
pub mod report;
pub mod trainer;

pub use error::{Error, Result};
pub use models::{count_params, Forecaster, ModelConfig};
pub use numerics::{ParamStore, RunRng, Stream, Tensor2D};
pub use trainer::{evaluate, extract_diagnostics, train, Diagnostics, Metrics, TrainConfig};
