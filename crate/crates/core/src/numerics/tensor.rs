//! Dense row-major f64 matrices and the three matmul layouts the models need.
//!
//! Everything is CPU-only and deterministic: each output row is produced by
//! exactly one thread with a fixed summation order, so results do not depend
//! on the rayon thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix of f64 values. Vectors are 1×n, scalars 1×1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor2D {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Tensor2D {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor2D {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::config(format!(
                "tensor data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Tensor2D { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::config(format!(
                    "row {i} has length {}, expected {n_cols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Tensor2D {
            rows: n_rows,
            cols: n_cols,
            data,
        })
    }

    /// 1×n row vector.
    pub fn vector(values: Vec<f64>) -> Self {
        Tensor2D {
            rows: 1,
            cols: values.len(),
            data: values,
        }
    }

    /// 1×1 scalar tensor.
    pub fn scalar(value: f64) -> Self {
        Tensor2D {
            rows: 1,
            cols: 1,
            data: vec![value],
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// The single value of a 1×1 tensor.
    pub fn scalar_value(&self) -> f64 {
        debug_assert_eq!(self.data.len(), 1, "scalar_value on non-scalar tensor");
        self.data[0]
    }

    pub fn fill(&mut self, v: f64) {
        self.data.fill(v);
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor2D {
        Tensor2D {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn same_shape(&self, other: &Tensor2D) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }

    /// Elementwise `self += other`.
    pub fn add_assign(&mut self, other: &Tensor2D) {
        debug_assert!(self.same_shape(other));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Elementwise `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Tensor2D, scale: f64) {
        debug_assert!(self.same_shape(other));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += scale * b;
        }
    }

    pub fn scale_in_place(&mut self, scale: f64) {
        for v in &mut self.data {
            *v *= scale;
        }
    }
}

/// Below this many multiply-adds the parallel kernels run single-threaded.
const PAR_FLOP_THRESHOLD: usize = 1 << 16;

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // Eight fixed accumulator lanes so the FP adds pipeline and vectorize;
    // the summation order is part of the code, so results are identical on
    // every run and thread count.
    let mut acc = [0.0f64; 8];
    let chunks_a = a.chunks_exact(8);
    let chunks_b = b.chunks_exact(8);
    let mut tail = 0.0;
    for (x, y) in chunks_a.remainder().iter().zip(chunks_b.remainder()) {
        tail += x * y;
    }
    for (x, y) in chunks_a.zip(chunks_b) {
        for i in 0..8 {
            acc[i] += x[i] * y[i];
        }
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

#[inline]
fn axpy(acc: &mut [f64], scale: f64, row: &[f64]) {
    debug_assert_eq!(acc.len(), row.len());
    for (a, &r) in acc.iter_mut().zip(row) {
        *a += scale * r;
    }
}

/// `A (m×k) · Bᵀ (k×n from n×k)`: both operands are read along contiguous rows.
/// This is the linear-layer forward: `y = x · Wᵀ` with `W` stored out×in.
pub fn matmul_nt(a: &Tensor2D, b: &Tensor2D) -> Tensor2D {
    assert_eq!(a.cols, b.cols, "matmul_nt inner dimensions differ");
    let (m, n, k) = (a.rows, b.rows, a.cols);
    let mut out = Tensor2D::zeros(m, n);
    let work = m * n * k;
    let body = |(i, out_row): (usize, &mut [f64])| {
        let a_row = a.row(i);
        for (j, o) in out_row.iter_mut().enumerate() {
            *o = dot(a_row, b.row(j));
        }
    };
    if work >= PAR_FLOP_THRESHOLD {
        out.data
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(i, r)| body((i, r)));
    } else {
        for (i, r) in out.data.chunks_mut(n).enumerate() {
            body((i, r));
        }
    }
    out
}

/// `A (m×k) · B (k×n)`: the input gradient `dx = dy · W`.
pub fn matmul_nn(a: &Tensor2D, b: &Tensor2D) -> Tensor2D {
    assert_eq!(a.cols, b.rows, "matmul_nn inner dimensions differ");
    let (m, n, k) = (a.rows, b.cols, a.cols);
    let mut out = Tensor2D::zeros(m, n);
    let work = m * n * k;
    let body = |(i, out_row): (usize, &mut [f64])| {
        let a_row = a.row(i);
        for (l, &a_il) in a_row.iter().enumerate() {
            if a_il != 0.0 {
                axpy(out_row, a_il, b.row(l));
            }
        }
    };
    if work >= PAR_FLOP_THRESHOLD {
        out.data
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(i, r)| body((i, r)));
    } else {
        for (i, r) in out.data.chunks_mut(n).enumerate() {
            body((i, r));
        }
    }
    out
}

/// `Aᵀ (k×m from m×k) · B (m×n)`, accumulated into `out`: the weight
/// gradient `dW += dyᵀ · x` with dy m×k and x m×n.
pub fn matmul_tn_accumulate(out: &mut Tensor2D, a: &Tensor2D, b: &Tensor2D) {
    assert_eq!(a.rows, b.rows, "matmul_tn outer dimensions differ");
    assert_eq!(out.rows, a.cols, "matmul_tn output rows mismatch");
    assert_eq!(out.cols, b.cols, "matmul_tn output cols mismatch");
    let (m, k, n) = (a.rows, a.cols, b.cols);
    let work = m * k * n;
    let cols = out.cols;
    let body = |(j, out_row): (usize, &mut [f64])| {
        for i in 0..m {
            let scale = a.get(i, j);
            if scale != 0.0 {
                axpy(out_row, scale, b.row(i));
            }
        }
    };
    if work >= PAR_FLOP_THRESHOLD {
        out.data
            .par_chunks_mut(cols)
            .enumerate()
            .for_each(|(j, r)| body((j, r)));
    } else {
        for (j, r) in out.data.chunks_mut(cols).enumerate() {
            body((j, r));
        }
    }
}
