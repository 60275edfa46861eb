//! Forward operations and their analytic reverse-mode gradients.
//!
//! The model graphs are fixed and small, so each layer ships a hand-derived
//! backward instead of a general autodiff tape. Gradient buffers are
//! accumulated into (`+=`); callers zero them per batch.

use crate::error::{Error, Result};
use crate::numerics::rng::RunRng;
use crate::numerics::tensor::{matmul_nn, matmul_nt, matmul_tn_accumulate, Tensor2D};

/// Affine map `y[i,j] = Σ_k w[j,k]·x[i,k] + b[j]` with `w` stored out×in.
pub fn linear_forward(x: &Tensor2D, w: &Tensor2D, b: &Tensor2D) -> Result<Tensor2D> {
    if x.cols() != w.cols() {
        return Err(Error::config(format!(
            "linear: input width {} does not match weight in-dim {}",
            x.cols(),
            w.cols()
        )));
    }
    if b.len() != w.rows() {
        return Err(Error::config(format!(
            "linear: bias length {} does not match weight out-dim {}",
            b.len(),
            w.rows()
        )));
    }
    let mut y = matmul_nt(x, w);
    let bias = b.data();
    for r in 0..y.rows() {
        for (v, bj) in y.row_mut(r).iter_mut().zip(bias) {
            *v += bj;
        }
    }
    Ok(y)
}

/// Backward of [`linear_forward`]: accumulates `dw += dyᵀ·x`, `db += Σ_rows dy`,
/// and returns `dx = dy·w`.
pub fn linear_backward(
    x: &Tensor2D,
    w: &Tensor2D,
    dy: &Tensor2D,
    dw: &mut Tensor2D,
    db: &mut Tensor2D,
) -> Tensor2D {
    debug_assert_eq!(dy.cols(), w.rows());
    debug_assert_eq!(dy.rows(), x.rows());
    matmul_tn_accumulate(dw, dy, x);
    for r in 0..dy.rows() {
        for (acc, &g) in db.data_mut().iter_mut().zip(dy.row(r)) {
            *acc += g;
        }
    }
    matmul_nn(dy, w)
}

/// Standard normal CDF via the exact erf formulation.
#[inline]
fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

/// Standard normal density.
#[inline]
fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Elementwise `x·Φ(x)` with Φ the exact standard normal CDF.
pub fn gelu(x: &Tensor2D) -> Tensor2D {
    x.map(|v| v * normal_cdf(v))
}

/// Backward of [`gelu`]: `dx = dy ⊙ (Φ(x) + x·φ(x))`.
pub fn gelu_backward(x: &Tensor2D, dy: &Tensor2D) -> Tensor2D {
    debug_assert!(x.same_shape(dy));
    let mut dx = dy.clone();
    for (d, &v) in dx.data_mut().iter_mut().zip(x.data()) {
        *d *= normal_cdf(v) + v * normal_pdf(v);
    }
    dx
}

/// Inverted dropout. In training mode each element is zeroed with probability
/// `rate` and survivors are scaled by `1/(1-rate)`; eval mode is the identity.
///
/// When a mask is produced it is returned as the per-element multipliers
/// (0 or 1/(1-rate)), so backward is the same elementwise product.
pub fn dropout_with_mask(
    x: &Tensor2D,
    rate: f64,
    training: bool,
    rng: &mut RunRng,
) -> Result<(Tensor2D, Option<Vec<f64>>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::config(format!(
            "dropout rate must satisfy 0 <= rate < 1, got {rate}"
        )));
    }
    if !training || rate == 0.0 {
        return Ok((x.clone(), None));
    }
    let keep_scale = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = (0..x.len())
        .map(|_| if rng.uniform() < rate { 0.0 } else { keep_scale })
        .collect();
    let mut y = x.clone();
    for (v, m) in y.data_mut().iter_mut().zip(&mask) {
        *v *= m;
    }
    Ok((y, Some(mask)))
}

pub fn dropout(x: &Tensor2D, rate: f64, training: bool, rng: &mut RunRng) -> Result<Tensor2D> {
    dropout_with_mask(x, rate, training, rng).map(|(y, _)| y)
}

pub fn dropout_backward(dy: &Tensor2D, mask: Option<&Vec<f64>>) -> Tensor2D {
    match mask {
        None => dy.clone(),
        Some(mask) => {
            let mut dx = dy.clone();
            for (d, m) in dx.data_mut().iter_mut().zip(mask) {
                *d *= m;
            }
            dx
        }
    }
}

/// Max-shifted softmax: positive outputs summing to 1.
pub fn softmax(v: &[f64]) -> Vec<f64> {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Backward through softmax: given `dL/dw` for weights `w = softmax(γ)`,
/// returns `dL/dγ` with `dγ_i = w_i (dw_i − Σ_j w_j dw_j)`.
pub fn softmax_backward(weights: &[f64], d_weights: &[f64]) -> Vec<f64> {
    debug_assert_eq!(weights.len(), d_weights.len());
    let inner: f64 = weights.iter().zip(d_weights).map(|(w, d)| w * d).sum();
    weights
        .iter()
        .zip(d_weights)
        .map(|(w, d)| w * (d - inner))
        .collect()
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// d sigmoid(x)/dx expressed through the activation value.
#[inline]
pub fn sigmoid_grad_from_output(s: f64) -> f64 {
    s * (1.0 - s)
}

/// Non-overlapping window means per row: output length is floor(T/s),
/// `s = 1` is the identity.
pub fn avg_pool(x: &Tensor2D, s: usize) -> Result<Tensor2D> {
    if s == 0 {
        return Err(Error::config("pooling factor must be >= 1"));
    }
    if s > x.cols() {
        return Err(Error::config(format!(
            "pooling factor {} exceeds input width {}",
            s,
            x.cols()
        )));
    }
    if s == 1 {
        return Ok(x.clone());
    }
    let out_len = x.cols() / s;
    let inv = 1.0 / s as f64;
    let mut out = Tensor2D::zeros(x.rows(), out_len);
    for r in 0..x.rows() {
        let row = x.row(r);
        let out_row = out.row_mut(r);
        for (i, o) in out_row.iter_mut().enumerate() {
            let start = i * s;
            let mut acc = 0.0;
            for &v in &row[start..start + s] {
                acc += v;
            }
            *o = acc * inv;
        }
    }
    Ok(out)
}

/// Backward of [`avg_pool`]: spreads `dy/s` over each pooled group; positions
/// truncated by the floor receive zero gradient.
pub fn avg_pool_backward(dy: &Tensor2D, s: usize, input_cols: usize) -> Tensor2D {
    if s == 1 {
        return dy.clone();
    }
    let inv = 1.0 / s as f64;
    let mut dx = Tensor2D::zeros(dy.rows(), input_cols);
    for r in 0..dy.rows() {
        let dy_row = dy.row(r);
        let dx_row = dx.row_mut(r);
        for (i, &g) in dy_row.iter().enumerate() {
            let start = i * s;
            let spread = g * inv;
            for v in &mut dx_row[start..start + s] {
                *v += spread;
            }
        }
    }
    dx
}

/// Moving-average trend/seasonal split. Edges are padded by replicating the
/// first/last value (κ−1)/2 times; the trend is the stride-1 mean of each
/// κ-window and the seasonal part is the exact residual `x − t`.
pub fn moving_average_decompose(x: &Tensor2D, kernel: usize) -> Result<(Tensor2D, Tensor2D)> {
    check_ma_kernel(kernel, x.cols())?;
    let half = (kernel - 1) / 2;
    let t_len = x.cols();
    let inv = 1.0 / kernel as f64;
    let mut trend = Tensor2D::zeros(x.rows(), t_len);
    let mut seasonal = Tensor2D::zeros(x.rows(), t_len);
    let mut padded = vec![0.0; t_len + 2 * half];
    for r in 0..x.rows() {
        let row = x.row(r);
        padded[..half].fill(row[0]);
        padded[half..half + t_len].copy_from_slice(row);
        padded[half + t_len..].fill(row[t_len - 1]);
        // Sliding sum over the padded row.
        let mut acc: f64 = padded[..kernel].iter().sum();
        let trend_row = trend.row_mut(r);
        trend_row[0] = acc * inv;
        for i in 1..t_len {
            acc += padded[i + kernel - 1] - padded[i - 1];
            trend_row[i] = acc * inv;
        }
        let seasonal_row = seasonal.row_mut(r);
        for i in 0..t_len {
            seasonal_row[i] = row[i] - trend_row[i];
        }
    }
    Ok((trend, seasonal))
}

/// Adjoint of the trend operator of [`moving_average_decompose`]: routes each
/// `dt[i]/κ` back to the clamped source indices of its window.
pub fn moving_average_adjoint(dt: &Tensor2D, kernel: usize) -> Tensor2D {
    let half = (kernel - 1) as isize / 2;
    let t_len = dt.cols() as isize;
    let inv = 1.0 / kernel as f64;
    let mut dx = Tensor2D::zeros(dt.rows(), dt.cols());
    for r in 0..dt.rows() {
        let dt_row = dt.row(r);
        let dx_row = dx.row_mut(r);
        for (i, &g) in dt_row.iter().enumerate() {
            let spread = g * inv;
            for j in (i as isize - half)..=(i as isize + half) {
                let src = j.clamp(0, t_len - 1) as usize;
                dx_row[src] += spread;
            }
        }
    }
    dx
}

fn check_ma_kernel(kernel: usize, width: usize) -> Result<()> {
    if kernel == 0 || kernel % 2 == 0 {
        return Err(Error::config(format!(
            "moving-average kernel must be odd and positive, got {kernel}"
        )));
    }
    if kernel > width {
        return Err(Error::config(format!(
            "moving-average kernel {kernel} exceeds input width {width}"
        )));
    }
    Ok(())
}

/// Mean squared error over every cell.
pub fn mse(pred: &Tensor2D, target: &Tensor2D) -> f64 {
    debug_assert!(pred.same_shape(target));
    let n = pred.len() as f64;
    pred.data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| {
            let d = p - t;
            d * d
        })
        .sum::<f64>()
        / n
}

/// Gradient of [`mse`] w.r.t. the prediction: `2(p − t)/n`.
pub fn mse_backward(pred: &Tensor2D, target: &Tensor2D) -> Tensor2D {
    debug_assert!(pred.same_shape(target));
    let scale = 2.0 / pred.len() as f64;
    let mut d = pred.clone();
    for (g, t) in d.data_mut().iter_mut().zip(target.data()) {
        *g = scale * (*g - t);
    }
    d
}

/// Mean absolute error over every cell.
pub fn mae(pred: &Tensor2D, target: &Tensor2D) -> f64 {
    debug_assert!(pred.same_shape(target));
    let n = pred.len() as f64;
    pred.data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| (p - t).abs())
        .sum::<f64>()
        / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::Stream;

    fn tensor(rows: usize, cols: usize, vals: &[f64]) -> Tensor2D {
        Tensor2D::from_vec(rows, cols, vals.to_vec()).unwrap()
    }

    #[test]
    fn linear_identity_weights() {
        let x = tensor(1, 2, &[1.0, 2.0]);
        let w = tensor(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let b = Tensor2D::vector(vec![0.0, 0.0]);
        let y = linear_forward(&x, &w, &b).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0]);
    }

    #[test]
    fn linear_direct_arithmetic() {
        let x = tensor(1, 2, &[1.0, 1.0]);
        let w = tensor(1, 2, &[2.0, 3.0]);
        let b = Tensor2D::vector(vec![1.0]);
        let y = linear_forward(&x, &w, &b).unwrap();
        assert_eq!(y.data(), &[6.0]);
    }

    #[test]
    fn linear_matches_naive_triple_loop_oracle() {
        let mut rng = RunRng::new(3, Stream::Init);
        let mut xv = vec![0.0; 15];
        let mut wv = vec![0.0; 20];
        rng.fill_normal(&mut xv, 1.0);
        rng.fill_normal(&mut wv, 1.0);
        let x = tensor(3, 5, &xv);
        let w = tensor(4, 5, &wv);
        let b = Tensor2D::vector(vec![0.5, -0.5, 0.25, 0.0]);
        let y = linear_forward(&x, &w, &b).unwrap();
        // Independent naive oracle.
        for i in 0..3 {
            for j in 0..4 {
                let mut acc = b.data()[j];
                for k in 0..5 {
                    acc += w.get(j, k) * x.get(i, k);
                }
                assert!((y.get(i, j) - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn linear_rejects_shape_mismatch() {
        let x = tensor(1, 3, &[0.0; 3]);
        let w = tensor(2, 2, &[0.0; 4]);
        let b = Tensor2D::vector(vec![0.0, 0.0]);
        assert!(linear_forward(&x, &w, &b).is_err());
    }

    #[test]
    fn gelu_fixed_points() {
        let x = tensor(1, 3, &[0.0, 10.0, 1.0]);
        let y = gelu(&x);
        assert_eq!(y.get(0, 0), 0.0);
        assert!((y.get(0, 1) - 10.0).abs() < 1e-6);
        // Φ(1) from an independent erf Maclaurin series oracle:
        // erf(z) = 2/√π Σ (−1)^n z^(2n+1) / (n! (2n+1)).
        let z = 1.0 / std::f64::consts::SQRT_2;
        let mut series = 0.0;
        let mut term = z;
        let mut n = 0u32;
        while term.abs() > 1e-18 {
            series += term / (2 * n + 1) as f64;
            n += 1;
            term *= -z * z / n as f64;
        }
        let phi_1 = 0.5 * (1.0 + 2.0 / std::f64::consts::PI.sqrt() * series);
        assert!((y.get(0, 2) - phi_1).abs() < 1e-12);
        assert!((y.get(0, 2) - 0.841_344_746_068_543).abs() < 1e-9);
    }

    #[test]
    fn dropout_eval_and_zero_rate_are_identity() {
        let x = tensor(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let mut rng = RunRng::new(42, Stream::Dropout);
        let eval = dropout(&x, 0.5, false, &mut rng).unwrap();
        assert_eq!(eval, x);
        let zero = dropout(&x, 0.0, true, &mut rng).unwrap();
        assert_eq!(zero, x);
    }

    #[test]
    fn dropout_preserves_mean_in_expectation() {
        let x = Tensor2D::from_vec(100, 100, vec![1.0; 10_000]).unwrap();
        let mut rng = RunRng::new(42, Stream::Dropout);
        let y = dropout(&x, 0.5, true, &mut rng).unwrap();
        let mean = y.data().iter().sum::<f64>() / y.len() as f64;
        assert!((mean - 1.0).abs() < 0.05, "empirical mean {mean}");
    }

    #[test]
    fn dropout_rejects_rate_one() {
        let x = tensor(1, 1, &[1.0]);
        let mut rng = RunRng::new(0, Stream::Dropout);
        assert!(dropout(&x, 1.0, true, &mut rng).is_err());
    }

    #[test]
    fn softmax_uniform_and_ratios() {
        let u = softmax(&[0.0, 0.0, 0.0]);
        for w in &u {
            assert!((w - 1.0 / 3.0).abs() < 1e-15);
        }
        let r = softmax(&[2.0_f64.ln(), 0.0, 0.0]);
        assert!((r[0] - 0.5).abs() < 1e-12);
        assert!((r[1] - 0.25).abs() < 1e-12);
        assert!((r[2] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn softmax_stable_under_large_logits() {
        let w = softmax(&[1000.0, 0.0, 0.0]);
        assert!(w.iter().all(|v| v.is_finite()));
        assert!((w[0] - 1.0).abs() < 1e-12);
        assert!(w[1] < 1e-12 && w[2] < 1e-12);
    }

    #[test]
    fn sigmoid_fixed_points() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(50.0) - 1.0).abs() < 1e-12);
        let x = 1.7;
        assert!((sigmoid(-x) - (1.0 - sigmoid(x))).abs() < 1e-15);
    }

    #[test]
    fn avg_pool_examples() {
        let x = tensor(1, 8, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        assert_eq!(avg_pool(&x, 1).unwrap(), x);
        let pooled = avg_pool(&x, 4).unwrap();
        assert_eq!(pooled.data(), &[2.5, 6.5]);
        // Alternating ±1 over a long window: period-2 component annihilated.
        let alt: Vec<f64> = (0..336).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let alt = tensor(1, 336, &alt);
        let pooled = avg_pool(&alt, 4).unwrap();
        assert!(pooled.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn avg_pool_rejects_oversized_factor() {
        let x = tensor(1, 4, &[0.0; 4]);
        assert!(avg_pool(&x, 5).is_err());
    }

    #[test]
    fn decompose_constant_and_ramp() {
        let c = tensor(1, 10, &[3.0; 10]);
        let (t, s) = moving_average_decompose(&c, 5).unwrap();
        assert_eq!(t.data(), c.data());
        assert!(s.data().iter().all(|&v| v == 0.0));

        // Strictly linear ramp: interior trend equals the ramp (centered window).
        let ramp: Vec<f64> = (0..11).map(|i| i as f64).collect();
        let ramp = tensor(1, 11, &ramp);
        let (t, _) = moving_average_decompose(&ramp, 3).unwrap();
        for i in 1..10 {
            assert!((t.get(0, i) - i as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn decompose_matches_bruteforce_padded_oracle() {
        let mut rng = RunRng::new(9, Stream::Init);
        let mut vals = vec![0.0; 7];
        rng.fill_normal(&mut vals, 1.0);
        let x = tensor(1, 7, &vals);
        let kernel = 3;
        let (t, s) = moving_average_decompose(&x, kernel).unwrap();
        // Brute-force padded mean oracle.
        let half = (kernel - 1) / 2;
        for i in 0..7 {
            let mut acc = 0.0;
            for j in (i as isize - half as isize)..=(i as isize + half as isize) {
                let src = j.clamp(0, 6) as usize;
                acc += vals[src];
            }
            let expect = acc / kernel as f64;
            assert!((t.get(0, i) - expect).abs() < 1e-12);
            assert!((s.get(0, i) - (vals[i] - expect)).abs() < 1e-12);
        }
    }

    #[test]
    fn decompose_rejects_even_kernel() {
        let x = tensor(1, 8, &[0.0; 8]);
        assert!(moving_average_decompose(&x, 4).is_err());
    }

    #[test]
    fn mse_and_mae_fixed_cases() {
        let y = tensor(1, 4, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(mse(&y, &y), 0.0);
        let shifted = y.map(|v| v + 1.0);
        assert_eq!(mse(&shifted, &y), 1.0);
        assert_eq!(mae(&shifted, &y), 1.0);
        let alternating = tensor(1, 4, &[3.0, 0.0, 5.0, 2.0]);
        assert_eq!(mse(&alternating, &y), 4.0);
        assert_eq!(mae(&alternating, &y), 2.0);
    }

    // Finite-difference checks for every backward in this module, dropout off.
    fn central_diff(f: &mut dyn FnMut(f64) -> f64, x0: f64, h: f64) -> f64 {
        (f(x0 + h) - f(x0 - h)) / (2.0 * h)
    }

    fn assert_close_rel(analytic: f64, numeric: f64) {
        let denom = analytic.abs().max(numeric.abs());
        let diff = (analytic - numeric).abs();
        assert!(
            diff <= 1e-4 * denom || diff <= 1e-7,
            "analytic {analytic} vs numeric {numeric}"
        );
    }

    #[test]
    fn op_backwards_match_finite_differences() {
        let mut rng = RunRng::new(11, Stream::Init);
        let h = 1e-5;

        // linear: loss = Σ y² with y = x·Wᵀ + b.
        let mut xv = vec![0.0; 6];
        let mut wv = vec![0.0; 12];
        rng.fill_normal(&mut xv, 1.0);
        rng.fill_normal(&mut wv, 1.0);
        let x = tensor(2, 3, &xv);
        let w = tensor(4, 3, &wv);
        let b = Tensor2D::vector(vec![0.1, -0.2, 0.3, 0.0]);
        let loss = |x: &Tensor2D, w: &Tensor2D, b: &Tensor2D| {
            let y = linear_forward(x, w, b).unwrap();
            y.data().iter().map(|v| v * v).sum::<f64>()
        };
        let y = linear_forward(&x, &w, &b).unwrap();
        let dy = y.map(|v| 2.0 * v);
        let mut dw = Tensor2D::zeros(4, 3);
        let mut db = Tensor2D::zeros(1, 4);
        let dx = linear_backward(&x, &w, &dy, &mut dw, &mut db);
        for idx in 0..w.len() {
            let mut f = |v: f64| {
                let mut wp = w.clone();
                wp.data_mut()[idx] = v;
                loss(&x, &wp, &b)
            };
            assert_close_rel(dw.data()[idx], central_diff(&mut f, w.data()[idx], h));
        }
        for idx in 0..b.len() {
            let mut f = |v: f64| {
                let mut bp = b.clone();
                bp.data_mut()[idx] = v;
                loss(&x, &w, &bp)
            };
            assert_close_rel(db.data()[idx], central_diff(&mut f, b.data()[idx], h));
        }
        for idx in 0..x.len() {
            let mut f = |v: f64| {
                let mut xp = x.clone();
                xp.data_mut()[idx] = v;
                loss(&xp, &w, &b)
            };
            assert_close_rel(dx.data()[idx], central_diff(&mut f, x.data()[idx], h));
        }

        // gelu, avg_pool, moving-average decompose, softmax-gate path: same drill.
        let mut vals = vec![0.0; 8];
        rng.fill_normal(&mut vals, 1.0);
        let x = tensor(2, 4, &vals);

        let y = gelu(&x);
        let dy = y.map(|v| 2.0 * v);
        let dx = gelu_backward(&x, &dy);
        for idx in 0..x.len() {
            let mut f = |v: f64| {
                let mut xp = x.clone();
                xp.data_mut()[idx] = v;
                gelu(&xp).data().iter().map(|u| u * u).sum::<f64>()
            };
            assert_close_rel(dx.data()[idx], central_diff(&mut f, x.data()[idx], h));
        }

        let pooled = avg_pool(&x, 2).unwrap();
        let dpool = pooled.map(|v| 2.0 * v);
        let dx = avg_pool_backward(&dpool, 2, 4);
        for idx in 0..x.len() {
            let mut f = |v: f64| {
                let mut xp = x.clone();
                xp.data_mut()[idx] = v;
                avg_pool(&xp, 2)
                    .unwrap()
                    .data()
                    .iter()
                    .map(|u| u * u)
                    .sum::<f64>()
            };
            assert_close_rel(dx.data()[idx], central_diff(&mut f, x.data()[idx], h));
        }

        let mut vals = vec![0.0; 9];
        rng.fill_normal(&mut vals, 1.0);
        let x = tensor(1, 9, &vals);
        // Loss touching both components: Σ t² + Σ 3s².
        let ma_loss = |x: &Tensor2D| {
            let (t, s) = moving_average_decompose(x, 3).unwrap();
            t.data().iter().map(|v| v * v).sum::<f64>()
                + 3.0 * s.data().iter().map(|v| v * v).sum::<f64>()
        };
        let (t, s) = moving_average_decompose(&x, 3).unwrap();
        let dt = t.map(|v| 2.0 * v);
        let ds = s.map(|v| 6.0 * v);
        // s = x − t ⇒ dx = MAᵀ(dt − ds) + ds.
        let mut dt_minus_ds = dt.clone();
        dt_minus_ds.add_scaled(&ds, -1.0);
        let mut dx = moving_average_adjoint(&dt_minus_ds, 3);
        dx.add_assign(&ds);
        for idx in 0..x.len() {
            let mut f = |v: f64| {
                let mut xp = x.clone();
                xp.data_mut()[idx] = v;
                ma_loss(&xp)
            };
            assert_close_rel(dx.data()[idx], central_diff(&mut f, x.data()[idx], h));
        }

        // softmax gate: loss = Σ_i (Σ_s w_s g_s[i])² for fixed branch outputs g.
        let logits = [0.3, -0.5, 0.2];
        let g = [
            tensor(1, 3, &[1.0, -2.0, 0.5]),
            tensor(1, 3, &[0.3, 0.8, -0.1]),
            tensor(1, 3, &[-1.2, 0.4, 0.9]),
        ];
        let gate_loss = |logits: &[f64]| {
            let w = softmax(logits);
            let mut z = Tensor2D::zeros(1, 3);
            for (ws, gs) in w.iter().zip(&g) {
                z.add_scaled(gs, *ws);
            }
            z.data().iter().map(|v| v * v).sum::<f64>()
        };
        let w = softmax(&logits);
        let mut z = Tensor2D::zeros(1, 3);
        for (ws, gs) in w.iter().zip(&g) {
            z.add_scaled(gs, *ws);
        }
        let dz = z.map(|v| 2.0 * v);
        let dw: Vec<f64> = g
            .iter()
            .map(|gs| gs.data().iter().zip(dz.data()).map(|(a, b)| a * b).sum())
            .collect();
        let dlogits = softmax_backward(&w, &dw);
        for idx in 0..3 {
            let mut f = |v: f64| {
                let mut lp = logits;
                lp[idx] = v;
                gate_loss(&lp)
            };
            assert_close_rel(dlogits[idx], central_diff(&mut f, logits[idx], h));
        }
    }

    #[test]
    fn gate_logit_gradient_sums_to_zero_for_identical_branches() {
        let g = tensor(2, 3, &[0.4, -0.7, 1.1, 0.0, 0.2, -0.3]);
        let w = softmax(&[0.0, 0.0, 0.0]);
        let dz = g.map(|v| 2.0 * v);
        // All branch outputs identical ⇒ identical per-branch inner products.
        let dw: Vec<f64> = (0..3)
            .map(|_| g.data().iter().zip(dz.data()).map(|(a, b)| a * b).sum())
            .collect();
        let dlogits = softmax_backward(&w, &dw);
        let total: f64 = dlogits.iter().sum();
        assert!(total.abs() < 1e-12);
        assert!(dlogits.iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn scalar_chain_rule_matches_hand_value() {
        // loss = MSE(Wx, y) for 1×1 W: d/dW = 2(Wx − y)x.
        let w = 1.5;
        let x = 0.7;
        let y = 2.0;
        let pred = tensor(1, 1, &[w * x]);
        let target = tensor(1, 1, &[y]);
        let d_pred = mse_backward(&pred, &target);
        let d_w = d_pred.get(0, 0) * x;
        let hand = 2.0 * (w * x - y) * x;
        assert!((d_w - hand).abs() < 1e-15);
    }
}
