//! The two linear baselines, channel-independent and trained on z-scored
//! inputs directly (no RevIN):
//! - DLinear: moving-average trend/seasonal split, one T→H projection per
//!   component, plain sum (no blend scalar);
//! - NLinear: subtract the last observed value, one T→H projection, add the
//!   value back.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::msmixer::INIT_WEIGHT_STD;
use crate::models::{Forecaster, ModelConfig, ParamBreakdown};
use crate::numerics::ops;
use crate::numerics::{ParamId, ParamStore, RunRng, Tensor2D};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DLinearConfig {
    pub lookback: usize,
    pub horizon: usize,
    pub kernel: usize,
}

impl Default for DLinearConfig {
    fn default() -> Self {
        DLinearConfig {
            lookback: 336,
            horizon: 96,
            kernel: 25,
        }
    }
}

struct DLinearCache {
    trend: Tensor2D,
    seasonal: Tensor2D,
}

pub struct DLinear {
    cfg: DLinearConfig,
    store: ParamStore,
    w_trend: ParamId,
    b_trend: ParamId,
    w_seasonal: ParamId,
    b_seasonal: ParamId,
    cache: Option<DLinearCache>,
}

impl DLinear {
    pub fn new(cfg: DLinearConfig, rng: &mut RunRng) -> Result<Self> {
        if cfg.kernel % 2 == 0 || cfg.kernel == 0 || cfg.kernel > cfg.lookback {
            return Err(Error::config(format!(
                "kernel must be odd and <= lookback, got {} vs {}",
                cfg.kernel, cfg.lookback
            )));
        }
        let mut store = ParamStore::new();
        let w_trend =
            store.register_normal("dlinear.w_trend", cfg.horizon, cfg.lookback, INIT_WEIGHT_STD, rng);
        let b_trend = store.register("dlinear.b_trend", 1, cfg.horizon);
        let w_seasonal = store.register_normal(
            "dlinear.w_seasonal",
            cfg.horizon,
            cfg.lookback,
            INIT_WEIGHT_STD,
            rng,
        );
        let b_seasonal = store.register("dlinear.b_seasonal", 1, cfg.horizon);
        Ok(DLinear {
            cfg,
            store,
            w_trend,
            b_trend,
            w_seasonal,
            b_seasonal,
            cache: None,
        })
    }
}

impl Forecaster for DLinear {
    fn forward(&mut self, inputs: &Tensor2D, _training: bool, _rng: &mut RunRng) -> Result<Tensor2D> {
        if inputs.cols() != self.cfg.lookback {
            return Err(Error::config(format!(
                "input width {} does not match lookback {}",
                inputs.cols(),
                self.cfg.lookback
            )));
        }
        let (trend, seasonal) = ops::moving_average_decompose(inputs, self.cfg.kernel)?;
        let mut pred = ops::linear_forward(
            &trend,
            self.store.value(self.w_trend),
            self.store.value(self.b_trend),
        )?;
        let seasonal_part = ops::linear_forward(
            &seasonal,
            self.store.value(self.w_seasonal),
            self.store.value(self.b_seasonal),
        )?;
        pred.add_assign(&seasonal_part);
        self.cache = Some(DLinearCache { trend, seasonal });
        Ok(pred)
    }

    fn backward(&mut self, d_pred: &Tensor2D) -> Result<()> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::usage("backward called before forward"))?;
        for (w, b, x) in [
            (self.w_trend, self.b_trend, &cache.trend),
            (self.w_seasonal, self.b_seasonal, &cache.seasonal),
        ] {
            let mut dw = std::mem::replace(self.store.grad_mut(w), Tensor2D::zeros(0, 0));
            let mut db = std::mem::replace(self.store.grad_mut(b), Tensor2D::zeros(0, 0));
            let _ = ops::linear_backward(x, self.store.value(w), d_pred, &mut dw, &mut db);
            *self.store.grad_mut(w) = dw;
            *self.store.grad_mut(b) = db;
        }
        self.store.mark_grads_ready();
        Ok(())
    }

    fn store(&self) -> &ParamStore {
        &self.store
    }

    fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn param_breakdown(&self) -> ParamBreakdown {
        let proj = self.cfg.lookback * self.cfg.horizon + self.cfg.horizon;
        let rows = vec![
            ("DLinear trend W_t".to_owned(), proj),
            ("DLinear season W_s".to_owned(), proj),
        ];
        ParamBreakdown { total: 2 * proj, rows }
    }

    fn gate_weights(&self) -> Option<Vec<(usize, f64)>> {
        None
    }

    fn fusion_alpha(&self) -> Option<f64> {
        None
    }

    fn trend_blend(&self) -> Option<f64> {
        None
    }

    fn model_config(&self) -> ModelConfig {
        ModelConfig::DLinear(self.cfg.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NLinearConfig {
    pub lookback: usize,
    pub horizon: usize,
}

impl Default for NLinearConfig {
    fn default() -> Self {
        NLinearConfig {
            lookback: 336,
            horizon: 96,
        }
    }
}

struct NLinearCache {
    shifted: Tensor2D,
}

pub struct NLinear {
    cfg: NLinearConfig,
    store: ParamStore,
    w: ParamId,
    b: ParamId,
    cache: Option<NLinearCache>,
}

impl NLinear {
    pub fn new(cfg: NLinearConfig, rng: &mut RunRng) -> Result<Self> {
        let mut store = ParamStore::new();
        let w = store.register_normal("nlinear.w", cfg.horizon, cfg.lookback, INIT_WEIGHT_STD, rng);
        let b = store.register("nlinear.b", 1, cfg.horizon);
        Ok(NLinear {
            cfg,
            store,
            w,
            b,
            cache: None,
        })
    }
}

impl Forecaster for NLinear {
    fn forward(&mut self, inputs: &Tensor2D, _training: bool, _rng: &mut RunRng) -> Result<Tensor2D> {
        if inputs.cols() != self.cfg.lookback {
            return Err(Error::config(format!(
                "input width {} does not match lookback {}",
                inputs.cols(),
                self.cfg.lookback
            )));
        }
        let last_col = self.cfg.lookback - 1;
        let mut shifted = inputs.clone();
        let mut lasts = Vec::with_capacity(inputs.rows());
        for r in 0..inputs.rows() {
            let last = inputs.get(r, last_col);
            lasts.push(last);
            for v in shifted.row_mut(r) {
                *v -= last;
            }
        }
        let mut pred = ops::linear_forward(&shifted, self.store.value(self.w), self.store.value(self.b))?;
        for (r, &last) in lasts.iter().enumerate() {
            for v in pred.row_mut(r) {
                *v += last;
            }
        }
        self.cache = Some(NLinearCache { shifted });
        Ok(pred)
    }

    fn backward(&mut self, d_pred: &Tensor2D) -> Result<()> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::usage("backward called before forward"))?;
        let mut dw = std::mem::replace(self.store.grad_mut(self.w), Tensor2D::zeros(0, 0));
        let mut db = std::mem::replace(self.store.grad_mut(self.b), Tensor2D::zeros(0, 0));
        let _ = ops::linear_backward(&cache.shifted, self.store.value(self.w), d_pred, &mut dw, &mut db);
        *self.store.grad_mut(self.w) = dw;
        *self.store.grad_mut(self.b) = db;
        self.store.mark_grads_ready();
        Ok(())
    }

    fn store(&self) -> &ParamStore {
        &self.store
    }

    fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn param_breakdown(&self) -> ParamBreakdown {
        let proj = self.cfg.lookback * self.cfg.horizon + self.cfg.horizon;
        ParamBreakdown {
            rows: vec![("NLinear W".to_owned(), proj)],
            total: proj,
        }
    }

    fn gate_weights(&self) -> Option<Vec<(usize, f64)>> {
        None
    }

    fn fusion_alpha(&self) -> Option<f64> {
        None
    }

    fn trend_blend(&self) -> Option<f64> {
        None
    }

    fn model_config(&self) -> ModelConfig {
        ModelConfig::NLinear(self.cfg.clone())
    }
}
