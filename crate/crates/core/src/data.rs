//! ETT-style CSV ingestion, the 70/10/20 split and z-score protocol, and
//! (look-back, horizon) window batching in the channel-independent layout.

use std::ops::Range;
use std::path::Path;

use chrono::NaiveDateTime;

use crate::error::{Error, Result};
use crate::numerics::{RunRng, Tensor2D};

/// Multivariate series as loaded: `values` is T_total×N, one column per variate.
#[derive(Debug, Clone)]
pub struct RawSeries {
    pub timestamps: Vec<i64>,
    pub values: Tensor2D,
    pub variate_names: Vec<String>,
    /// Non-fatal issues found during load (e.g. non-uniform timestamp spacing).
    pub warnings: Vec<String>,
}

impl RawSeries {
    pub fn n_steps(&self) -> usize {
        self.values.rows()
    }

    pub fn n_variates(&self) -> usize {
        self.values.cols()
    }
}

fn parse_timestamp(s: &str) -> Option<i64> {
    NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S")
        .ok()
        .or_else(|| {
            chrono::NaiveDate::parse_from_str(s, "%Y-%m-%d")
                .ok()
                .and_then(|d| d.and_hms_opt(0, 0, 0))
        })
        .map(|dt| dt.and_utc().timestamp())
}

/// Load a CSV with header `date,<name1>,...,<nameN>`, a date string in the
/// first column and numeric values elsewhere.
pub fn load_csv(path: impl AsRef<Path>) -> Result<RawSeries> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::load(path, format!("cannot open CSV: {e}")))?;

    let headers = reader
        .headers()
        .map_err(|e| Error::load(path, format!("cannot read header: {e}")))?;
    if headers.len() < 2 {
        return Err(Error::load(path, "expected a date column plus at least one variate"));
    }
    let variate_names: Vec<String> = headers.iter().skip(1).map(str::to_owned).collect();
    let n_variates = variate_names.len();

    let mut timestamps = Vec::new();
    let mut flat = Vec::new();
    for (i, record) in reader.records().enumerate() {
        // Row index reported 1-based over data rows (header excluded).
        let row = i + 1;
        let record = record.map_err(|e| Error::load(path, format!("row {row}: {e}")))?;
        if record.len() != n_variates + 1 {
            return Err(Error::load(
                path,
                format!("row {row}: expected {} fields, found {}", n_variates + 1, record.len()),
            ));
        }
        let date_str = &record[0];
        let ts = parse_timestamp(date_str)
            .ok_or_else(|| Error::load(path, format!("row {row}: unparseable date '{date_str}'")))?;
        timestamps.push(ts);
        for (c, field) in record.iter().skip(1).enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::load(
                    path,
                    format!(
                        "row {row}: non-numeric value '{field}' in column '{}'",
                        variate_names[c]
                    ),
                )
            })?;
            flat.push(v);
        }
    }
    if timestamps.is_empty() {
        return Err(Error::load(path, "no data rows"));
    }

    let mut warnings = Vec::new();
    if timestamps.len() > 2 {
        let step = timestamps[1] - timestamps[0];
        let uniform = step > 0
            && timestamps
                .windows(2)
                .all(|w| w[1] - w[0] == step);
        if !uniform {
            warnings.push("non-uniform timestamp spacing".to_owned());
        }
    }

    let values = Tensor2D::from_vec(timestamps.len(), n_variates, flat)?;
    Ok(RawSeries {
        timestamps,
        values,
        variate_names,
        warnings,
    })
}

/// Contiguous train/val/test index ranges plus the window geometry.
#[derive(Debug, Clone)]
pub struct SplitSpec {
    /// Steps the trainer samples windows from; a train cap truncates this.
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
    /// The canonical 70% train split the z-score statistics are fit on.
    /// Equals the full train range whether or not sampling is capped, so the
    /// normalized space is the same protocol space either way.
    pub stats_range: Range<usize>,
    pub lookback: usize,
    pub horizon: usize,
    pub train_cap: Option<usize>,
    /// Whether val/test windows may draw look-back context from before their
    /// range start (targets never cross split boundaries forward either way).
    pub cross_border_lookback: bool,
}

/// 70/10/20 split with floor arithmetic; the remainder goes to test. A
/// `train_cap` truncates the trained-on range to its first `cap` steps;
/// normalization statistics still come from the full 70% split.
pub fn make_splits(
    series: &RawSeries,
    lookback: usize,
    horizon: usize,
    train_cap: Option<usize>,
) -> Result<SplitSpec> {
    let total = series.n_steps();
    if total < lookback + horizon {
        return Err(Error::config(format!(
            "series of length {total} cannot fit one ({lookback}, {horizon}) window"
        )));
    }
    let train_len = total * 7 / 10;
    let val_len = total / 10;
    let capped_train_len = match train_cap {
        Some(cap) => train_len.min(cap),
        None => train_len,
    };
    Ok(SplitSpec {
        train: 0..capped_train_len,
        val: train_len..train_len + val_len,
        test: train_len + val_len..total,
        stats_range: 0..train_len,
        lookback,
        horizon,
        train_cap,
        cross_border_lookback: true,
    })
}

/// Series after per-variate train-split z-scoring, ready for window sampling.
#[derive(Debug, Clone)]
pub struct WindowedDataset {
    pub values: Tensor2D,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub split: SplitSpec,
    pub warnings: Vec<String>,
}

const STD_FLOOR: f64 = 1e-8;

/// Fit per-variate mean and population std on the train split (never on val
/// or test) and apply `(x − μ)/σ` to every row. Constant variates get a
/// floored σ and a warning.
pub fn fit_apply_zscore(series: &RawSeries, split: SplitSpec) -> Result<WindowedDataset> {
    if split.train.is_empty() || split.stats_range.is_empty() {
        return Err(Error::config("train range is empty"));
    }
    let n_variates = series.n_variates();
    let train_n = split.stats_range.len() as f64;
    let mut mean = vec![0.0; n_variates];
    let mut std = vec![0.0; n_variates];
    let mut warnings = series.warnings.clone();

    for v in 0..n_variates {
        let mut acc = 0.0;
        for r in split.stats_range.clone() {
            acc += series.values.get(r, v);
        }
        mean[v] = acc / train_n;
        let mut var = 0.0;
        for r in split.stats_range.clone() {
            let d = series.values.get(r, v) - mean[v];
            var += d * d;
        }
        let sigma = (var / train_n).sqrt();
        if sigma < STD_FLOOR {
            warnings.push(format!(
                "variate '{}' is constant on the train split; std floored",
                series.variate_names.get(v).map(String::as_str).unwrap_or("?")
            ));
            std[v] = STD_FLOOR;
        } else {
            std[v] = sigma;
        }
    }

    let mut values = series.values.clone();
    for r in 0..values.rows() {
        let row = values.row_mut(r);
        for (v, x) in row.iter_mut().enumerate() {
            *x = (*x - mean[v]) / std[v];
        }
    }

    Ok(WindowedDataset {
        values,
        mean,
        std,
        split,
        warnings,
    })
}

impl WindowedDataset {
    /// Invert the stored z-score for one variate.
    pub fn denormalize(&self, variate: usize, z: f64) -> f64 {
        z * self.std[variate] + self.mean[variate]
    }

    pub fn n_variates(&self) -> usize {
        self.values.cols()
    }
}

/// One mini-batch in the channel-independent layout: row `b·N + v` of
/// `inputs` holds variate `v` of window `b`.
#[derive(Debug, Clone)]
pub struct WindowBatch {
    pub inputs: Tensor2D,
    pub targets: Tensor2D,
    pub n_windows: usize,
    pub n_variates: usize,
    pub lookback: usize,
    pub horizon: usize,
}

/// Start indices of every (lookback, horizon) window whose target lies
/// entirely inside `range`. With cross-border look-back the input may begin up
/// to `lookback` steps before the range start (clamped at zero).
pub fn window_starts(
    range: &Range<usize>,
    lookback: usize,
    horizon: usize,
    cross_border_lookback: bool,
) -> Vec<usize> {
    let earliest = if cross_border_lookback {
        range.start.saturating_sub(lookback)
    } else {
        range.start
    };
    if range.end < earliest + lookback + horizon {
        return Vec::new();
    }
    let last = range.end - lookback - horizon;
    (earliest..=last).collect()
}

fn assemble_batch(
    ds: &WindowedDataset,
    starts: &[usize],
    lookback: usize,
    horizon: usize,
) -> WindowBatch {
    let n = ds.n_variates();
    let rows = starts.len() * n;
    let mut inputs = Tensor2D::zeros(rows, lookback);
    let mut targets = Tensor2D::zeros(rows, horizon);
    for (b, &s) in starts.iter().enumerate() {
        for v in 0..n {
            let row = b * n + v;
            let in_row = inputs.row_mut(row);
            for t in 0..lookback {
                in_row[t] = ds.values.get(s + t, v);
            }
            let out_row = targets.row_mut(row);
            for h in 0..horizon {
                out_row[h] = ds.values.get(s + lookback + h, v);
            }
        }
    }
    WindowBatch {
        inputs,
        targets,
        n_windows: starts.len(),
        n_variates: n,
        lookback,
        horizon,
    }
}

/// Iterator over stride-1 window batches of `batch_size` windows; the final
/// partial batch is included. Shuffling permutes the window order via `rng`.
pub struct WindowSampler<'a> {
    ds: &'a WindowedDataset,
    starts: Vec<usize>,
    batch_size: usize,
    cursor: usize,
}

impl<'a> WindowSampler<'a> {
    pub fn n_windows(&self) -> usize {
        self.starts.len()
    }
}

impl<'a> Iterator for WindowSampler<'a> {
    type Item = WindowBatch;

    fn next(&mut self) -> Option<WindowBatch> {
        if self.cursor >= self.starts.len() {
            return None;
        }
        let end = self.cursor.saturating_add(self.batch_size).min(self.starts.len());
        let batch = assemble_batch(
            self.ds,
            &self.starts[self.cursor..end],
            self.ds.split.lookback,
            self.ds.split.horizon,
        );
        self.cursor = end;
        Some(batch)
    }
}

pub fn sample_windows<'a>(
    ds: &'a WindowedDataset,
    range: &Range<usize>,
    batch_size: usize,
    shuffle: bool,
    rng: Option<&mut RunRng>,
) -> Result<WindowSampler<'a>> {
    // Only val/test draw look-back context from before their range; the
    // train range never reaches back (relevant when a cap moves its start).
    let reach_back = ds.split.cross_border_lookback && *range != ds.split.train;
    let mut starts = window_starts(range, ds.split.lookback, ds.split.horizon, reach_back);
    if starts.is_empty() {
        return Err(Error::config(format!(
            "range {range:?} does not fit one ({}, {}) window",
            ds.split.lookback, ds.split.horizon
        )));
    }
    if shuffle {
        let rng = rng.ok_or_else(|| Error::usage("shuffle requested without an rng"))?;
        rng.shuffle(&mut starts);
    }
    Ok(WindowSampler {
        ds,
        starts,
        batch_size,
        cursor: 0,
    })
}

/// Reshape a (B, T, N) value array into the (B·N, T) channel-independent rows.
pub fn reshape_btn_to_rows(btn: &[Vec<Vec<f64>>]) -> Result<Tensor2D> {
    let b = btn.len();
    let t = btn.first().map_or(0, Vec::len);
    let n = btn.first().and_then(|w| w.first()).map_or(0, Vec::len);
    let mut out = Tensor2D::zeros(b * n, t);
    for (bi, window) in btn.iter().enumerate() {
        if window.len() != t {
            return Err(Error::config("ragged window length"));
        }
        for (ti, step) in window.iter().enumerate() {
            if step.len() != n {
                return Err(Error::config("ragged variate count"));
            }
            for (vi, &x) in step.iter().enumerate() {
                out.set(bi * n + vi, ti, x);
            }
        }
    }
    Ok(out)
}

/// Inverse of [`reshape_btn_to_rows`].
pub fn reshape_rows_to_btn(rows: &Tensor2D, n_variates: usize) -> Vec<Vec<Vec<f64>>> {
    let b = rows.rows() / n_variates;
    let t = rows.cols();
    let mut out = vec![vec![vec![0.0; n_variates]; t]; b];
    for bi in 0..b {
        for vi in 0..n_variates {
            let row = rows.row(bi * n_variates + vi);
            for ti in 0..t {
                out[bi][ti][vi] = row[ti];
            }
        }
    }
    out
}
