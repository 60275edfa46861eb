//! The end-to-end training procedure: shuffled mini-batch epochs with
//! forward/MSE/backward/clip/AdamW, per-epoch validation, plateau scheduling,
//! early stopping, and best-checkpoint restore, plus evaluation and
//! diagnostics extraction.
//!
//! RNG discipline per run: init draws happen at model construction (stream 0),
//! the train window order is shuffled once per epoch (stream 1), and dropout
//! masks are drawn per batch in branch order (stream 2).

use std::ops::Range;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{sample_windows, WindowedDataset};
use crate::error::{Error, Result};
use crate::models::Forecaster;
use crate::numerics::{ops, RunRng, Stream};
use crate::optim::{clip_grad_norm, AdamW, EarlyStopper, PlateauScheduler, StopDecision};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            weight_decay: 1e-4,
            batch_size: 64,
            max_epochs: 15,
            patience: 4,
            seed: 42,
            clip_norm: 1.0,
        }
    }
}

/// Error metrics over every predicted (window, step, variate) cell, in
/// z-scored space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub mae: f64,
    pub n_cells: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainTrace {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

impl TrainTrace {
    pub fn epochs_run(&self) -> usize {
        self.epochs.len()
    }
}

/// Learned run diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// (scale, softmax weight) pairs; sums to 1 when present.
    pub gate_weights: Option<Vec<(usize, f64)>>,
    pub fusion_alpha: Option<f64>,
    pub trend_blend: Option<f64>,
    pub param_total: usize,
    pub epochs_run: usize,
}

pub fn extract_diagnostics(model: &dyn Forecaster, epochs_run: usize) -> Diagnostics {
    Diagnostics {
        gate_weights: model.gate_weights(),
        fusion_alpha: model.fusion_alpha(),
        trend_blend: model.trend_blend(),
        param_total: model.param_breakdown().total,
        epochs_run,
    }
}

/// Deterministic eval-mode metrics over every window whose target lies in `range`.
pub fn evaluate(
    model: &mut dyn Forecaster,
    ds: &WindowedDataset,
    range: &Range<usize>,
    batch_size: usize,
) -> Result<Metrics> {
    if range.is_empty() {
        return Err(Error::config("evaluation range is empty"));
    }
    let sampler = sample_windows(ds, range, batch_size, false, None)?;
    // Eval never draws from the dropout stream; the rng argument is inert.
    let mut inert_rng = RunRng::new(0, Stream::Dropout);
    let mut sq_sum = 0.0;
    let mut abs_sum = 0.0;
    let mut n_cells = 0usize;
    for batch in sampler {
        let pred = model.forward(&batch.inputs, false, &mut inert_rng)?;
        for (p, t) in pred.data().iter().zip(batch.targets.data()) {
            let d = p - t;
            sq_sum += d * d;
            abs_sum += d.abs();
        }
        n_cells += pred.len();
    }
    Ok(Metrics {
        mse: sq_sum / n_cells as f64,
        mae: abs_sum / n_cells as f64,
        n_cells,
    })
}

/// Run the full training procedure and return the trace. On return the model
/// holds the parameters of its best validation epoch.
pub fn train(
    model: &mut dyn Forecaster,
    ds: &WindowedDataset,
    cfg: &TrainConfig,
) -> Result<TrainTrace> {
    let mut shuffle_rng = RunRng::new(cfg.seed, Stream::Shuffle);
    let mut dropout_rng = RunRng::new(cfg.seed, Stream::Dropout);
    let mut optimizer = AdamW::new(model.store(), cfg.lr, cfg.weight_decay);
    let mut scheduler = PlateauScheduler::new(cfg.lr);
    let mut stopper = EarlyStopper::new(cfg.patience);
    let mut trace = TrainTrace::default();

    for epoch in 1..=cfg.max_epochs {
        let started = Instant::now();
        let sampler = sample_windows(
            ds,
            &ds.split.train,
            cfg.batch_size,
            true,
            Some(&mut shuffle_rng),
        )?;

        let mut loss_sum = 0.0;
        let mut cell_count = 0usize;
        for (batch_idx, batch) in sampler.enumerate() {
            let pred = model.forward(&batch.inputs, true, &mut dropout_rng)?;
            let loss = ops::mse(&pred, &batch.targets);
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: batch_idx,
                    lr: optimizer.lr,
                });
            }
            loss_sum += loss * pred.len() as f64;
            cell_count += pred.len();

            let d_pred = ops::mse_backward(&pred, &batch.targets);
            model.store_mut().zero_grads();
            model.backward(&d_pred)?;
            clip_grad_norm(model.store_mut(), cfg.clip_norm);
            optimizer.step(model.store_mut())?;
        }
        let train_loss = loss_sum / cell_count as f64;

        let val_loss = evaluate(model, ds, &ds.split.val.clone(), cfg.batch_size)?.mse;
        optimizer.lr = scheduler.step(val_loss);
        let decision = stopper.check(epoch, val_loss, model.store());

        trace.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            lr: optimizer.lr,
            wall_seconds: started.elapsed().as_secs_f64(),
        });

        if decision == StopDecision::Stop {
            trace.stopped_early = true;
            break;
        }
    }

    stopper.restore_best(model.store_mut())?;
    trace.best_epoch = stopper.best_epoch().unwrap_or(0);
    trace.best_val_loss = stopper.best_val_loss().unwrap_or(f64::NAN);
    Ok(trace)
}
