//! Reversible per-window instance normalization with learnable per-variate
//! affine parameters.
//!
//! Rows follow the channel-independent layout, so row `r` belongs to variate
//! `r mod N`. Window statistics use the population std (divide by T) and the
//! de-normalize direction guards the division by γ with the same ε.

use crate::error::{Error, Result};
use crate::numerics::{ParamId, ParamStore, Tensor2D};

pub const REVIN_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct RevIn {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub n_variates: usize,
    pub eps: f64,
}

/// Per-row window statistics cached by `normalize` for the matching
/// `denormalize` call (and the backward pass).
#[derive(Debug, Clone)]
pub struct RevInStats {
    pub mu: Vec<f64>,
    /// σ + ε per row.
    pub denom: Vec<f64>,
    /// (x − μ)/(σ + ε), cached for the affine backward.
    pub norm_core: Tensor2D,
    consumed: bool,
}

#[inline]
fn guard_gamma(g: f64, eps: f64) -> f64 {
    if g.abs() < eps {
        if g < 0.0 {
            -eps
        } else {
            eps
        }
    } else {
        g
    }
}

impl RevIn {
    /// Registers γ (init 1) and β (init 0), one pair per variate.
    pub fn new(store: &mut ParamStore, n_variates: usize) -> Self {
        let gamma = store.register_const("revin.gamma", 1, n_variates, 1.0);
        let beta = store.register("revin.beta", 1, n_variates);
        RevIn {
            gamma,
            beta,
            n_variates,
            eps: REVIN_EPS,
        }
    }

    #[inline]
    fn variate_of(&self, row: usize) -> usize {
        row % self.n_variates
    }

    /// Per-row normalize: `x̂ = ((x − μ)/(σ + ε))·γ_v + β_v`.
    pub fn normalize(&self, store: &ParamStore, x: &Tensor2D) -> (Tensor2D, RevInStats) {
        let rows = x.rows();
        let cols = x.cols();
        let inv_t = 1.0 / cols as f64;
        let gamma = store.value(self.gamma).data();
        let beta = store.value(self.beta).data();

        let mut mu = vec![0.0; rows];
        let mut denom = vec![0.0; rows];
        let mut norm_core = Tensor2D::zeros(rows, cols);
        let mut out = Tensor2D::zeros(rows, cols);

        for r in 0..rows {
            let row = x.row(r);
            let mean = row.iter().sum::<f64>() * inv_t;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() * inv_t;
            let d = var.sqrt() + self.eps;
            mu[r] = mean;
            denom[r] = d;
            let v = self.variate_of(r);
            let (g, b) = (gamma[v], beta[v]);
            let core_row = norm_core.row_mut(r);
            for (i, &xv) in row.iter().enumerate() {
                core_row[i] = (xv - mean) / d;
            }
            let out_row = out.row_mut(r);
            for (o, &c) in out_row.iter_mut().zip(norm_core.row(r)) {
                *o = c * g + b;
            }
        }

        (
            out,
            RevInStats {
                mu,
                denom,
                norm_core,
                consumed: false,
            },
        )
    }

    /// Exact algebraic inverse: `ŷ = ((z − β_v)/γ_v)·(σ + ε) + μ`.
    /// Each stats cache may be consumed by exactly one denormalize call.
    pub fn denormalize(
        &self,
        store: &ParamStore,
        z: &Tensor2D,
        stats: &mut RevInStats,
    ) -> Result<Tensor2D> {
        if stats.consumed {
            return Err(Error::usage(
                "RevIN stats already consumed by a previous denormalize call",
            ));
        }
        if z.rows() != stats.mu.len() {
            return Err(Error::usage("RevIN stats row count does not match input"));
        }
        stats.consumed = true;
        let gamma = store.value(self.gamma).data();
        let beta = store.value(self.beta).data();
        let mut out = Tensor2D::zeros(z.rows(), z.cols());
        for r in 0..z.rows() {
            let v = self.variate_of(r);
            let g = guard_gamma(gamma[v], self.eps);
            let b = beta[v];
            let (mu, d) = (stats.mu[r], stats.denom[r]);
            for (o, &zv) in out.row_mut(r).iter_mut().zip(z.row(r)) {
                *o = (zv - b) / g * d + mu;
            }
        }
        Ok(out)
    }

    /// Backward through `denormalize`: returns dL/dz and accumulates the
    /// affine gradients that flow through the inverse transform.
    pub fn backward_denormalize(
        &self,
        store: &mut ParamStore,
        d_pred: &Tensor2D,
        z: &Tensor2D,
        stats: &RevInStats,
    ) -> Tensor2D {
        let gamma = store.value(self.gamma).data().to_vec();
        let beta = store.value(self.beta).data().to_vec();
        let mut dz = Tensor2D::zeros(z.rows(), z.cols());
        let mut d_gamma = vec![0.0; self.n_variates];
        let mut d_beta = vec![0.0; self.n_variates];
        for r in 0..z.rows() {
            let v = self.variate_of(r);
            let raw_g = gamma[v];
            let g = guard_gamma(raw_g, self.eps);
            let guarded = raw_g.abs() < self.eps;
            let b = beta[v];
            let d = stats.denom[r];
            let dz_row = dz.row_mut(r);
            for ((dzv, &dp), &zv) in dz_row.iter_mut().zip(d_pred.row(r)).zip(z.row(r)) {
                *dzv = dp * d / g;
                if !guarded {
                    d_gamma[v] += dp * d * (-(zv - b) / (g * g));
                }
                d_beta[v] += dp * (-d / g);
            }
        }
        for (acc, dg) in store.grad_mut(self.gamma).data_mut().iter_mut().zip(&d_gamma) {
            *acc += dg;
        }
        for (acc, db) in store.grad_mut(self.beta).data_mut().iter_mut().zip(&d_beta) {
            *acc += db;
        }
        dz
    }

    /// Backward through `normalize` for the affine parameters (the input
    /// carries no parameters upstream, so no dL/dx is produced).
    pub fn backward_normalize(
        &self,
        store: &mut ParamStore,
        d_xhat: &Tensor2D,
        stats: &RevInStats,
    ) {
        let mut d_gamma = vec![0.0; self.n_variates];
        let mut d_beta = vec![0.0; self.n_variates];
        for r in 0..d_xhat.rows() {
            let v = self.variate_of(r);
            for (&dx, &core) in d_xhat.row(r).iter().zip(stats.norm_core.row(r)) {
                d_gamma[v] += dx * core;
                d_beta[v] += dx;
            }
        }
        for (acc, dg) in store.grad_mut(self.gamma).data_mut().iter_mut().zip(&d_gamma) {
            *acc += dg;
        }
        for (acc, db) in store.grad_mut(self.beta).data_mut().iter_mut().zip(&d_beta) {
            *acc += db;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::{RunRng, Stream};

    fn setup(n_variates: usize) -> (ParamStore, RevIn) {
        let mut store = ParamStore::new();
        let revin = RevIn::new(&mut store, n_variates);
        (store, revin)
    }

    #[test]
    fn constant_window_normalizes_to_zero_and_inverts() {
        let (store, revin) = setup(1);
        let c = 7.5;
        let x = Tensor2D::from_vec(1, 8, vec![c; 8]).unwrap();
        let (xhat, mut stats) = revin.normalize(&store, &x);
        assert!(xhat.data().iter().all(|&v| v == 0.0));
        let back = revin.denormalize(&store, &xhat, &mut stats).unwrap();
        for &v in back.data() {
            assert!((v - c).abs() < 1e-9);
        }
    }

    #[test]
    fn standardized_window_passes_through() {
        let (store, revin) = setup(1);
        let x = Tensor2D::from_vec(1, 2, vec![-1.0, 1.0]).unwrap();
        let (xhat, _) = revin.normalize(&store, &x);
        // μ=0, σ=1: output ≈ input (up to the ε in the denominator).
        assert!((xhat.get(0, 0) + 1.0).abs() < 1e-4);
        assert!((xhat.get(0, 1) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn zero_input_denormalizes_to_window_mean() {
        let (store, revin) = setup(1);
        let x = Tensor2D::from_vec(1, 4, vec![2.0, 4.0, 6.0, 8.0]).unwrap();
        let (_, mut stats) = revin.normalize(&store, &x);
        let z = Tensor2D::zeros(1, 3);
        let y = revin.denormalize(&store, &z, &mut stats).unwrap();
        for &v in y.data() {
            assert!((v - 5.0).abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip_on_random_input() {
        let (store, revin) = setup(3);
        let mut rng = RunRng::new(5, Stream::Init);
        let mut vals = vec![0.0; 6 * 32];
        rng.fill_normal(&mut vals, 2.0);
        let x = Tensor2D::from_vec(6, 32, vals).unwrap();
        let (xhat, mut stats) = revin.normalize(&store, &x);
        let back = revin.denormalize(&store, &xhat, &mut stats).unwrap();
        for (a, b) in back.data().iter().zip(x.data()) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn stats_are_single_use() {
        let (store, revin) = setup(1);
        let x = Tensor2D::from_vec(1, 4, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (xhat, mut stats) = revin.normalize(&store, &x);
        revin.denormalize(&store, &xhat, &mut stats).unwrap();
        assert!(revin.denormalize(&store, &xhat, &mut stats).is_err());
    }
}
