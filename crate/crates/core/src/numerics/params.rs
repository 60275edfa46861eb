//! Named learnable parameters with paired gradient buffers.

use crate::error::{Error, Result};
use crate::numerics::rng::RunRng;
use crate::numerics::tensor::Tensor2D;

/// Handle into a [`ParamStore`]; stable for the lifetime of the store.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(usize);

#[derive(Debug, Clone)]
pub struct ParamEntry {
    pub name: String,
    pub value: Tensor2D,
    pub grad: Tensor2D,
}

/// Ordered collection of (name, value, gradient) triples.
///
/// Registration order is deterministic for a fixed model configuration, which
/// pins the initialisation draw sequence and the checkpoint layout.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    entries: Vec<ParamEntry>,
    grads_ready: bool,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    /// Register a zero-initialised parameter.
    pub fn register(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> ParamId {
        let id = ParamId(self.entries.len());
        self.entries.push(ParamEntry {
            name: name.into(),
            value: Tensor2D::zeros(rows, cols),
            grad: Tensor2D::zeros(rows, cols),
        });
        id
    }

    /// Register a parameter filled with i.i.d. N(0, std²) draws in row-major order.
    pub fn register_normal(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        std: f64,
        rng: &mut RunRng,
    ) -> ParamId {
        let id = self.register(name, rows, cols);
        rng.fill_normal(self.entries[id.0].value.data_mut(), std);
        id
    }

    /// Register a parameter with every element set to `value`.
    pub fn register_const(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        value: f64,
    ) -> ParamId {
        let id = self.register(name, rows, cols);
        self.entries[id.0].value.fill(value);
        id
    }

    #[inline]
    pub fn value(&self, id: ParamId) -> &Tensor2D {
        &self.entries[id.0].value
    }

    #[inline]
    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor2D {
        &mut self.entries[id.0].value
    }

    #[inline]
    pub fn grad(&self, id: ParamId) -> &Tensor2D {
        &self.entries[id.0].grad
    }

    #[inline]
    pub fn grad_mut(&mut self, id: ParamId) -> &mut Tensor2D {
        &mut self.entries[id.0].grad
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn by_name(&self, name: &str) -> Option<ParamId> {
        self.entries.iter().position(|e| e.name == name).map(ParamId)
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [ParamEntry] {
        &mut self.entries
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn total_count(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    pub fn zero_grads(&mut self) {
        for e in &mut self.entries {
            e.grad.fill(0.0);
        }
        self.grads_ready = false;
    }

    /// Marks gradients as populated; set by a completed backward pass.
    pub fn mark_grads_ready(&mut self) {
        self.grads_ready = true;
    }

    pub fn grads_ready(&self) -> bool {
        self.grads_ready
    }

    /// Copy of all parameter values, in registration order.
    pub fn snapshot(&self) -> Vec<Vec<f64>> {
        self.entries.iter().map(|e| e.value.data().to_vec()).collect()
    }

    pub fn restore(&mut self, snapshot: &[Vec<f64>]) -> Result<()> {
        if snapshot.len() != self.entries.len() {
            return Err(Error::usage(format!(
                "snapshot has {} entries, store has {}",
                snapshot.len(),
                self.entries.len()
            )));
        }
        for (entry, saved) in self.entries.iter_mut().zip(snapshot) {
            if saved.len() != entry.value.len() {
                return Err(Error::usage(format!(
                    "snapshot entry for '{}' has {} values, expected {}",
                    entry.name,
                    saved.len(),
                    entry.value.len()
                )));
            }
            entry.value.data_mut().copy_from_slice(saved);
        }
        Ok(())
    }
}
