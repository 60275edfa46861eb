//! The multi-scale mixer forward graph and its reverse-mode backward:
//! RevIN → channel-independent rows → pooled scale branches → softmax gate →
//! moving-average shortcut → sigmoid fusion → RevIN inverse.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::revin::{RevIn, RevInStats};
use crate::models::{Forecaster, ModelConfig, ParamBreakdown};
use crate::numerics::ops;
use crate::numerics::{ParamId, ParamStore, RunRng, Tensor2D};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsMixerConfig {
    pub lookback: usize,
    pub horizon: usize,
    pub hidden: usize,
    pub n_variates: usize,
    pub scales: Vec<usize>,
    pub kernel: usize,
    pub dropout: f64,
    /// Replace RevIN with the identity (ablation "w/o RevIN").
    pub use_revin: bool,
    /// When false the fusion scalar is removed and the forecast comes from the
    /// multi-scale pathway alone; shortcut parameters are still constructed
    /// (ablation "w/o DLinear shortcut").
    pub use_shortcut_fusion: bool,
}

impl Default for MsMixerConfig {
    fn default() -> Self {
        MsMixerConfig {
            lookback: 336,
            horizon: 96,
            hidden: 64,
            n_variates: 7,
            scales: vec![1, 4, 16],
            kernel: 25,
            dropout: 0.1,
            use_revin: true,
            use_shortcut_fusion: true,
        }
    }
}

impl MsMixerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lookback == 0 || self.horizon == 0 || self.hidden == 0 || self.n_variates == 0 {
            return Err(Error::config("lookback, horizon, hidden, n_variates must be positive"));
        }
        if self.scales.is_empty() {
            return Err(Error::config("at least one scale is required"));
        }
        for &s in &self.scales {
            if s == 0 {
                return Err(Error::config("scales must be >= 1"));
            }
            if self.lookback % s != 0 {
                return Err(Error::config(format!(
                    "scale {s} does not divide lookback {}",
                    self.lookback
                )));
            }
        }
        if self.kernel % 2 == 0 || self.kernel == 0 {
            return Err(Error::config(format!("kernel must be odd, got {}", self.kernel)));
        }
        if self.kernel > self.lookback {
            return Err(Error::config(format!(
                "kernel {} exceeds lookback {}",
                self.kernel, self.lookback
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config(format!("dropout must be in [0, 1), got {}", self.dropout)));
        }
        Ok(())
    }
}

pub const INIT_WEIGHT_STD: f64 = 0.02;

struct BranchIds {
    scale: usize,
    w1: ParamId,
    b1: ParamId,
    w2: ParamId,
    b2: ParamId,
}

struct ShortcutIds {
    w_trend: ParamId,
    b_trend: ParamId,
    w_seasonal: ParamId,
    b_seasonal: ParamId,
    blend_logit: ParamId,
}

struct BranchCache {
    pooled: Tensor2D,
    pre_act: Tensor2D,
    dropped: Tensor2D,
    mask: Option<Vec<f64>>,
    output: Tensor2D,
}

struct ShortcutCache {
    trend: Tensor2D,
    seasonal: Tensor2D,
    proj_trend: Tensor2D,
    proj_seasonal: Tensor2D,
    blend: f64,
    z_lin: Tensor2D,
}

struct ForwardCache {
    revin_stats: Option<RevInStats>,
    x_hat: Tensor2D,
    branches: Vec<BranchCache>,
    gate_weights: Vec<f64>,
    z_ms: Tensor2D,
    shortcut: Option<ShortcutCache>,
    alpha: Option<f64>,
    fused: Tensor2D,
}

pub struct MsMixer {
    cfg: MsMixerConfig,
    store: ParamStore,
    revin: Option<RevIn>,
    branches: Vec<BranchIds>,
    gate: ParamId,
    shortcut: ShortcutIds,
    fusion_logit: Option<ParamId>,
    cache: Option<ForwardCache>,
}

impl MsMixer {
    /// Build and initialise: weight matrices ~ N(0, 0.02²) drawn in
    /// registration order from the init stream, biases and logits zero,
    /// RevIN affine at (1, 0).
    pub fn new(cfg: MsMixerConfig, rng: &mut RunRng) -> Result<Self> {
        cfg.validate()?;
        let mut store = ParamStore::new();
        let revin = cfg.use_revin.then(|| RevIn::new(&mut store, cfg.n_variates));

        let mut branches = Vec::with_capacity(cfg.scales.len());
        for &s in &cfg.scales {
            let width = cfg.lookback / s;
            let prefix = format!("branch_s{s}");
            branches.push(BranchIds {
                scale: s,
                w1: store.register_normal(format!("{prefix}.w1"), cfg.hidden, width, INIT_WEIGHT_STD, rng),
                b1: store.register(format!("{prefix}.b1"), 1, cfg.hidden),
                w2: store.register_normal(format!("{prefix}.w2"), cfg.horizon, cfg.hidden, INIT_WEIGHT_STD, rng),
                b2: store.register(format!("{prefix}.b2"), 1, cfg.horizon),
            });
        }
        let gate = store.register("gate.logits", 1, cfg.scales.len());

        let shortcut = ShortcutIds {
            w_trend: store.register_normal("shortcut.w_trend", cfg.horizon, cfg.lookback, INIT_WEIGHT_STD, rng),
            b_trend: store.register("shortcut.b_trend", 1, cfg.horizon),
            w_seasonal: store.register_normal("shortcut.w_seasonal", cfg.horizon, cfg.lookback, INIT_WEIGHT_STD, rng),
            b_seasonal: store.register("shortcut.b_seasonal", 1, cfg.horizon),
            blend_logit: store.register("shortcut.blend_logit", 1, 1),
        };
        let fusion_logit = cfg
            .use_shortcut_fusion
            .then(|| store.register("fusion.logit", 1, 1));

        Ok(MsMixer {
            cfg,
            store,
            revin,
            branches,
            gate,
            shortcut,
            fusion_logit,
            cache: None,
        })
    }

    pub fn config(&self) -> &MsMixerConfig {
        &self.cfg
    }

    /// Softmax of the gate logits, paired with their scales.
    pub fn gate_distribution(&self) -> Vec<(usize, f64)> {
        let w = ops::softmax(self.store.value(self.gate).data());
        self.cfg.scales.iter().copied().zip(w).collect()
    }

    fn branch_forward(
        &self,
        ids: &BranchIds,
        x_hat: &Tensor2D,
        training: bool,
        rng: &mut RunRng,
    ) -> Result<BranchCache> {
        let pooled = ops::avg_pool(x_hat, ids.scale)?;
        let pre_act = ops::linear_forward(&pooled, self.store.value(ids.w1), self.store.value(ids.b1))?;
        let activated = ops::gelu(&pre_act);
        let (dropped, mask) = ops::dropout_with_mask(&activated, self.cfg.dropout, training, rng)?;
        let output = ops::linear_forward(&dropped, self.store.value(ids.w2), self.store.value(ids.b2))?;
        Ok(BranchCache {
            pooled,
            pre_act,
            dropped,
            mask,
            output,
        })
    }

    /// Accumulate dW/db for one affine layer and return dL/dx. The gradient
    /// buffers are swapped out of the store so the weight value can be
    /// borrowed at the same time.
    fn linear_backward_into(
        &mut self,
        w: ParamId,
        b: ParamId,
        x: &Tensor2D,
        dy: &Tensor2D,
    ) -> Tensor2D {
        let mut dw = std::mem::replace(self.store.grad_mut(w), Tensor2D::zeros(0, 0));
        let mut db = std::mem::replace(self.store.grad_mut(b), Tensor2D::zeros(0, 0));
        let dx = ops::linear_backward(x, self.store.value(w), dy, &mut dw, &mut db);
        *self.store.grad_mut(w) = dw;
        *self.store.grad_mut(b) = db;
        dx
    }

    fn shortcut_forward(&self, x_hat: &Tensor2D) -> Result<ShortcutCache> {
        let (trend, seasonal) = ops::moving_average_decompose(x_hat, self.cfg.kernel)?;
        let proj_trend = ops::linear_forward(
            &trend,
            self.store.value(self.shortcut.w_trend),
            self.store.value(self.shortcut.b_trend),
        )?;
        let proj_seasonal = ops::linear_forward(
            &seasonal,
            self.store.value(self.shortcut.w_seasonal),
            self.store.value(self.shortcut.b_seasonal),
        )?;
        let blend = ops::sigmoid(self.store.value(self.shortcut.blend_logit).scalar_value());
        let mut z_lin = Tensor2D::zeros(proj_trend.rows(), proj_trend.cols());
        z_lin.add_scaled(&proj_trend, blend);
        z_lin.add_scaled(&proj_seasonal, 1.0 - blend);
        Ok(ShortcutCache {
            trend,
            seasonal,
            proj_trend,
            proj_seasonal,
            blend,
            z_lin,
        })
    }
}

impl Forecaster for MsMixer {
    fn forward(&mut self, inputs: &Tensor2D, training: bool, rng: &mut RunRng) -> Result<Tensor2D> {
        if inputs.cols() != self.cfg.lookback {
            return Err(Error::config(format!(
                "input width {} does not match lookback {}",
                inputs.cols(),
                self.cfg.lookback
            )));
        }
        if inputs.rows() % self.cfg.n_variates != 0 {
            return Err(Error::config(format!(
                "input rows {} are not a multiple of n_variates {}",
                inputs.rows(),
                self.cfg.n_variates
            )));
        }

        let (x_hat, mut revin_stats) = match &self.revin {
            Some(revin) => {
                let (xh, stats) = revin.normalize(&self.store, inputs);
                (xh, Some(stats))
            }
            None => (inputs.clone(), None),
        };

        let mut branch_caches = Vec::with_capacity(self.branches.len());
        for ids in &self.branches {
            branch_caches.push(self.branch_forward(ids, &x_hat, training, rng)?);
        }
        let gate_weights = ops::softmax(self.store.value(self.gate).data());
        let mut z_ms = Tensor2D::zeros(inputs.rows(), self.cfg.horizon);
        for (cache, &w) in branch_caches.iter().zip(&gate_weights) {
            z_ms.add_scaled(&cache.output, w);
        }

        let (shortcut_cache, alpha, fused) = if let Some(fusion_id) = self.fusion_logit {
            let sc = self.shortcut_forward(&x_hat)?;
            let alpha = ops::sigmoid(self.store.value(fusion_id).scalar_value());
            let mut fused = Tensor2D::zeros(z_ms.rows(), z_ms.cols());
            fused.add_scaled(&z_ms, alpha);
            fused.add_scaled(&sc.z_lin, 1.0 - alpha);
            (Some(sc), Some(alpha), fused)
        } else {
            (None, None, z_ms.clone())
        };

        let pred = if let (Some(revin), Some(stats)) = (&self.revin, revin_stats.as_mut()) {
            revin.denormalize(&self.store, &fused, stats)?
        } else {
            fused.clone()
        };

        self.cache = Some(ForwardCache {
            revin_stats,
            x_hat,
            branches: branch_caches,
            gate_weights,
            z_ms,
            shortcut: shortcut_cache,
            alpha,
            fused,
        });
        Ok(pred)
    }

    fn backward(&mut self, d_pred: &Tensor2D) -> Result<()> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::usage("backward called before forward"))?;

        // RevIN inverse.
        let dz = match (&self.revin, &cache.revin_stats) {
            (Some(revin), Some(stats)) => {
                revin.backward_denormalize(&mut self.store, d_pred, &cache.fused, stats)
            }
            _ => d_pred.clone(),
        };

        // Fusion split.
        let (dz_ms, dz_lin) = match (cache.alpha, self.fusion_logit) {
            (Some(alpha), Some(fusion_id)) => {
                let sc = cache.shortcut.as_ref().expect("fusion implies shortcut cache");
                let mut d_alpha = 0.0;
                for ((&g, &ms), &lin) in dz
                    .data()
                    .iter()
                    .zip(cache.z_ms.data())
                    .zip(sc.z_lin.data())
                {
                    d_alpha += g * (ms - lin);
                }
                let d_logit = d_alpha * ops::sigmoid_grad_from_output(alpha);
                self.store.grad_mut(fusion_id).data_mut()[0] += d_logit;
                let mut dz_ms = dz.clone();
                dz_ms.scale_in_place(alpha);
                let mut dz_lin = dz;
                dz_lin.scale_in_place(1.0 - alpha);
                (dz_ms, Some(dz_lin))
            }
            _ => (dz, None),
        };

        let mut d_xhat = Tensor2D::zeros(cache.x_hat.rows(), cache.x_hat.cols());

        // Shortcut pathway.
        if let (Some(dz_lin), Some(sc)) = (dz_lin, &cache.shortcut) {
            let mut d_blend = 0.0;
            for ((&g, &pt), &ps) in dz_lin
                .data()
                .iter()
                .zip(sc.proj_trend.data())
                .zip(sc.proj_seasonal.data())
            {
                d_blend += g * (pt - ps);
            }
            let d_blend_logit = d_blend * ops::sigmoid_grad_from_output(sc.blend);
            self.store.grad_mut(self.shortcut.blend_logit).data_mut()[0] += d_blend_logit;

            let mut dp_trend = dz_lin.clone();
            dp_trend.scale_in_place(sc.blend);
            let mut dp_seasonal = dz_lin;
            dp_seasonal.scale_in_place(1.0 - sc.blend);

            let d_trend = self.linear_backward_into(
                self.shortcut.w_trend,
                self.shortcut.b_trend,
                &sc.trend,
                &dp_trend,
            );
            let d_seasonal = self.linear_backward_into(
                self.shortcut.w_seasonal,
                self.shortcut.b_seasonal,
                &sc.seasonal,
                &dp_seasonal,
            );

            // seasonal = x̂ − trend(x̂) ⇒ dx̂ = MAᵀ(dt − ds) + ds.
            let mut dt_minus_ds = d_trend;
            dt_minus_ds.add_scaled(&d_seasonal, -1.0);
            let mut dx_sc = ops::moving_average_adjoint(&dt_minus_ds, self.cfg.kernel);
            dx_sc.add_assign(&d_seasonal);
            d_xhat.add_assign(&dx_sc);
        }

        // Gate and branches.
        let mut d_gate_weights = vec![0.0; self.branches.len()];
        for (i, bc) in cache.branches.iter().enumerate() {
            d_gate_weights[i] = dz_ms
                .data()
                .iter()
                .zip(bc.output.data())
                .map(|(g, o)| g * o)
                .sum();
        }
        let d_logits = ops::softmax_backward(&cache.gate_weights, &d_gate_weights);
        for (acc, dl) in self.store.grad_mut(self.gate).data_mut().iter_mut().zip(&d_logits) {
            *acc += dl;
        }

        for (i, bc) in cache.branches.iter().enumerate() {
            let (scale, w1, b1, w2, b2) = {
                let ids = &self.branches[i];
                (ids.scale, ids.w1, ids.b1, ids.w2, ids.b2)
            };
            let mut d_out = dz_ms.clone();
            d_out.scale_in_place(cache.gate_weights[i]);

            let d_dropped = self.linear_backward_into(w2, b2, &bc.dropped, &d_out);
            let d_act = ops::dropout_backward(&d_dropped, bc.mask.as_ref());
            let d_pre = ops::gelu_backward(&bc.pre_act, &d_act);
            let d_pooled = self.linear_backward_into(w1, b1, &bc.pooled, &d_pre);

            let dx = ops::avg_pool_backward(&d_pooled, scale, self.cfg.lookback);
            d_xhat.add_assign(&dx);
        }

        // RevIN normalize.
        if let (Some(revin), Some(stats)) = (&self.revin, &cache.revin_stats) {
            revin.backward_normalize(&mut self.store, &d_xhat, stats);
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
        let mut rows = Vec::new();
        if self.revin.is_some() {
            rows.push(("RevIN (gamma_n, beta_n)".to_owned(), 2 * self.cfg.n_variates));
        }
        for ids in &self.branches {
            let width = self.cfg.lookback / ids.scale;
            let count = self.cfg.hidden * width
                + self.cfg.hidden
                + self.cfg.horizon * self.cfg.hidden
                + self.cfg.horizon;
            rows.push((
                format!(
                    "Branch s={}: MLP({} -> {} -> {})",
                    ids.scale, width, self.cfg.hidden, self.cfg.horizon
                ),
                count,
            ));
        }
        rows.push(("Scale gate".to_owned(), self.cfg.scales.len()));
        let proj = self.cfg.lookback * self.cfg.horizon + self.cfg.horizon;
        rows.push(("DLinear trend W_t".to_owned(), proj));
        rows.push(("DLinear season W_s".to_owned(), proj));
        rows.push(("DLinear weight w~".to_owned(), 1));
        if self.fusion_logit.is_some() {
            rows.push(("Fusion scalar alpha~".to_owned(), 1));
        }
        let total = rows.iter().map(|(_, c)| c).sum();
        debug_assert_eq!(total, self.store.total_count());
        ParamBreakdown { rows, total }
    }

    fn gate_weights(&self) -> Option<Vec<(usize, f64)>> {
        Some(self.gate_distribution())
    }

    fn fusion_alpha(&self) -> Option<f64> {
        self.fusion_logit
            .map(|id| ops::sigmoid(self.store.value(id).scalar_value()))
    }

    fn trend_blend(&self) -> Option<f64> {
        Some(ops::sigmoid(
            self.store.value(self.shortcut.blend_logit).scalar_value(),
        ))
    }

    fn model_config(&self) -> ModelConfig {
        ModelConfig::MsMixer(self.cfg.clone())
    }
}
