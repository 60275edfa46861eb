//! Central finite-difference gradient checker.
//!
//! Works against any subject that exposes its [`ParamStore`]: the caller runs
//! forward + backward once to populate analytic gradients, then this module
//! re-evaluates the loss under ±h perturbations of every parameter element.

use crate::numerics::params::ParamStore;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckSettings {
    /// Central-difference step.
    pub step: f64,
    /// Relative error bound.
    pub rel_tol: f64,
    /// Absolute fallback for gradients at or near zero, where the relative
    /// criterion is meaningless against FD round-off.
    pub abs_floor: f64,
}

impl Default for GradCheckSettings {
    fn default() -> Self {
        GradCheckSettings {
            step: 1e-4,
            rel_tol: 1e-4,
            abs_floor: 1e-7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradMismatch {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, Default)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    pub failures: Vec<GradMismatch>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Compare every analytic parameter gradient in `subject`'s store against a
/// central finite difference of `loss`.
///
/// `store_of` projects the mutable store out of the subject and `loss` must be
/// a pure function of the current parameter values (dropout disabled,
/// deterministic data).
pub fn check_param_gradients<S>(
    subject: &mut S,
    store_of: impl Fn(&mut S) -> &mut ParamStore,
    mut loss: impl FnMut(&mut S) -> f64,
    settings: GradCheckSettings,
) -> GradCheckReport {
    let analytic: Vec<(String, Vec<f64>)> = store_of(subject)
        .entries()
        .iter()
        .map(|e| (e.name.clone(), e.grad.data().to_vec()))
        .collect();

    let mut report = GradCheckReport::default();
    for (entry_idx, (name, grads)) in analytic.iter().enumerate() {
        for idx in 0..grads.len() {
            let original = store_of(subject).entries()[entry_idx].value.data()[idx];

            store_of(subject).entries_mut()[entry_idx].value.data_mut()[idx] =
                original + settings.step;
            let loss_plus = loss(subject);
            store_of(subject).entries_mut()[entry_idx].value.data_mut()[idx] =
                original - settings.step;
            let loss_minus = loss(subject);
            store_of(subject).entries_mut()[entry_idx].value.data_mut()[idx] = original;

            let numeric = (loss_plus - loss_minus) / (2.0 * settings.step);
            let analytic_g = grads[idx];
            let denom = analytic_g.abs().max(numeric.abs());
            let diff = (analytic_g - numeric).abs();
            let rel = if denom > 0.0 { diff / denom } else { 0.0 };
            report.checked += 1;
            report.max_rel_err = report.max_rel_err.max(if diff <= settings.abs_floor {
                0.0
            } else {
                rel
            });
            if diff > settings.abs_floor && rel > settings.rel_tol {
                report.failures.push(GradMismatch {
                    param: name.clone(),
                    index: idx,
                    analytic: analytic_g,
                    numeric,
                    rel_err: rel,
                });
            }
        }
    }
    report
}
