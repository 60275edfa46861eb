//! AdamW with decoupled weight decay, global gradient-norm clipping, the
//! halve-on-plateau scheduler, and early stopping with best-checkpoint
//! restore. Improvement is strict (<) everywhere; ties count as
//! non-improvement.

use crate::error::{Error, Result};
use crate::numerics::ParamStore;

/// Scale all gradients so the global L2 norm is at most `max_norm`.
/// Returns the applied scale (1 when no clip happened).
pub fn clip_grad_norm(store: &mut ParamStore, max_norm: f64) -> f64 {
    let mut sum_sq = 0.0;
    for entry in store.entries() {
        for &g in entry.grad.data() {
            sum_sq += g * g;
        }
    }
    let norm = sum_sq.sqrt();
    if norm <= max_norm || norm == 0.0 {
        return 1.0;
    }
    let scale = max_norm / norm;
    for entry in store.entries_mut() {
        entry.grad.scale_in_place(scale);
    }
    scale
}

#[derive(Debug, Clone)]
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step_count: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl AdamW {
    pub fn new(store: &ParamStore, lr: f64, weight_decay: f64) -> Self {
        AdamW {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            step_count: 0,
            first_moment: store.entries().iter().map(|e| vec![0.0; e.value.len()]).collect(),
            second_moment: store.entries().iter().map(|e| vec![0.0; e.value.len()]).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One bias-corrected AdamW update over every parameter:
    /// decay first (`θ *= 1 − lr·wd`), then `θ −= lr·m̂/(√v̂ + ε)`.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<()> {
        if !store.grads_ready() {
            return Err(Error::usage("optimizer step before gradients were populated"));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bias1 = 1.0 - self.beta1.powi(t);
        let bias2 = 1.0 - self.beta2.powi(t);
        let decay_factor = 1.0 - self.lr * self.weight_decay;

        for (entry, (m, v)) in store
            .entries_mut()
            .iter_mut()
            .zip(self.first_moment.iter_mut().zip(self.second_moment.iter_mut()))
        {
            let grads = entry.grad.data();
            for (i, theta) in entry.value.data_mut().iter_mut().enumerate() {
                let g = grads[i];
                *theta *= decay_factor;
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                *theta -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// Halves the learning rate once validation loss has failed to improve for
/// `patience + 1` consecutive epochs.
#[derive(Debug, Clone)]
pub struct PlateauScheduler {
    pub factor: f64,
    pub patience: usize,
    lr: f64,
    best: Option<f64>,
    bad_epochs: usize,
}

impl PlateauScheduler {
    pub fn new(initial_lr: f64) -> Self {
        PlateauScheduler {
            factor: 0.5,
            patience: 2,
            lr: initial_lr,
            best: None,
            bad_epochs: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Called once per epoch after validation; returns the (possibly reduced) lr.
    pub fn step(&mut self, val_loss: f64) -> f64 {
        match self.best {
            Some(best) if val_loss < best => {
                self.best = Some(val_loss);
                self.bad_epochs = 0;
            }
            Some(_) => {
                self.bad_epochs += 1;
                if self.bad_epochs > self.patience {
                    self.lr *= self.factor;
                    self.bad_epochs = 0;
                }
            }
            None => {
                self.best = Some(val_loss);
            }
        }
        self.lr
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Early stopping on validation loss; keeps a snapshot of the best epoch's
/// parameters for restore.
#[derive(Debug, Clone)]
pub struct EarlyStopper {
    pub patience: usize,
    best: Option<f64>,
    bad_epochs: usize,
    best_snapshot: Option<Vec<Vec<f64>>>,
    best_epoch: Option<usize>,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> Self {
        EarlyStopper {
            patience,
            best: None,
            bad_epochs: 0,
            best_snapshot: None,
            best_epoch: None,
        }
    }

    pub fn best_val_loss(&self) -> Option<f64> {
        self.best
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best_epoch
    }

    /// Called once per epoch. An improvement snapshots the parameters and
    /// resets the counter; the counter reaching `patience` stops training.
    pub fn check(&mut self, epoch: usize, val_loss: f64, store: &ParamStore) -> StopDecision {
        let improved = match self.best {
            Some(best) => val_loss < best,
            None => true,
        };
        if improved {
            self.best = Some(val_loss);
            self.best_epoch = Some(epoch);
            self.best_snapshot = Some(store.snapshot());
            self.bad_epochs = 0;
            StopDecision::Improved
        } else {
            self.bad_epochs += 1;
            if self.bad_epochs >= self.patience {
                StopDecision::Stop
            } else {
                StopDecision::Continue
            }
        }
    }

    /// Restore the best epoch's parameters into `store`.
    pub fn restore_best(&self, store: &mut ParamStore) -> Result<()> {
        match &self.best_snapshot {
            Some(snapshot) => store.restore(snapshot),
            None => Err(Error::usage("no checkpoint recorded yet")),
        }
    }
}
