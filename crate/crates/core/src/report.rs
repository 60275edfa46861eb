//! Run descriptions, persisted run reports, and the deterministic CSV /
//! markdown table renderers the benchmark harness emits.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelConfig;
use crate::trainer::{Diagnostics, Metrics, TrainConfig, TrainTrace};

/// Canonical model labels used in run directories and report tables.
pub const LABEL_MSMIXER: &str = "msmixer";
pub const LABEL_DLINEAR: &str = "dlinear";
pub const LABEL_NLINEAR: &str = "nlinear";
pub const LABEL_NO_SHORTCUT: &str = "msmixer-noshortcut";
pub const LABEL_SCALE1: &str = "msmixer-s1";
pub const LABEL_SCALES14: &str = "msmixer-s14";
pub const LABEL_NO_REVIN: &str = "msmixer-norevin";

/// Everything needed to reproduce one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub dataset: String,
    pub data_path: PathBuf,
    /// Report label; ablation variants map one-to-one onto these.
    pub label: String,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub train_cap: Option<usize>,
}

impl RunSpec {
    pub fn run_dir_name(&self) -> String {
        format!(
            "{}_{}_{}_{}",
            self.dataset,
            self.label,
            self.model.horizon(),
            self.train.seed
        )
    }
}

/// Serializable outcome of one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub spec: RunSpec,
    pub metrics: Metrics,
    pub diagnostics: Diagnostics,
    pub trace: TrainTrace,
}

impl RunReport {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path.as_ref(), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<RunReport> {
        let path = path.as_ref();
        let raw = fs::read_to_string(path).map_err(|e| Error::load(path, e.to_string()))?;
        serde_json::from_str(&raw).map_err(|e| Error::load(path, format!("bad report: {e}")))
    }

    fn gate_weight_for(&self, scale: usize) -> Option<f64> {
        self.diagnostics
            .gate_weights
            .as_ref()
            .and_then(|ws| ws.iter().find(|(s, _)| *s == scale).map(|(_, w)| *w))
    }
}

/// Training trace as the line-delimited record format.
pub fn trace_to_csv(trace: &TrainTrace) -> String {
    let mut out = String::from("epoch,train_loss,val_loss,lr,wall_seconds\n");
    for e in &trace.epochs {
        out.push_str(&format!(
            "{},{},{},{},{:.3}\n",
            e.epoch, e.train_loss, e.val_loss, e.lr, e.wall_seconds
        ));
    }
    out
}

pub const SUMMARY_HEADER: &str =
    "dataset,model,horizon,mse,mae,params,epochs,w1,w4,w16,alpha,trend_blend";

fn opt_cell(v: Option<f64>, precision: usize) -> String {
    v.map(|x| format!("{x:.precision$}")).unwrap_or_default()
}

/// Summary CSV over a set of reports, sorted by (dataset, model, horizon).
pub fn write_summary_csv(reports: &[&RunReport]) -> String {
    let mut sorted: Vec<&&RunReport> = reports.iter().collect();
    sorted.sort_by(|a, b| {
        (&a.spec.dataset, &a.spec.label, a.spec.model.horizon()).cmp(&(
            &b.spec.dataset,
            &b.spec.label,
            b.spec.model.horizon(),
        ))
    });
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in sorted {
        out.push_str(&format!(
            "{},{},{},{:.6},{:.6},{},{},{},{},{},{},{}\n",
            r.spec.dataset,
            r.spec.label,
            r.spec.model.horizon(),
            r.metrics.mse,
            r.metrics.mae,
            r.diagnostics.param_total,
            r.diagnostics.epochs_run,
            opt_cell(r.gate_weight_for(1), 4),
            opt_cell(r.gate_weight_for(4), 4),
            opt_cell(r.gate_weight_for(16), 4),
            opt_cell(r.diagnostics.fusion_alpha, 4),
            opt_cell(r.diagnostics.trend_blend, 4),
        ));
    }
    out
}

/// One parsed summary row; `None` where the model has no such diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub dataset: String,
    pub model: String,
    pub horizon: usize,
    pub mse: f64,
    pub mae: f64,
    pub params: usize,
    pub epochs: usize,
    pub w1: Option<f64>,
    pub w4: Option<f64>,
    pub w16: Option<f64>,
    pub alpha: Option<f64>,
    pub trend_blend: Option<f64>,
}

pub fn read_summary_csv(text: &str) -> Result<Vec<SummaryRow>> {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let parse_opt = |field: &str| -> Result<Option<f64>> {
        if field.is_empty() {
            Ok(None)
        } else {
            field
                .parse::<f64>()
                .map(Some)
                .map_err(|e| Error::config(format!("bad summary cell '{field}': {e}")))
        }
    };
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::config(format!("bad summary CSV: {e}")))?;
        if record.len() != 12 {
            return Err(Error::config(format!(
                "summary row has {} fields, expected 12",
                record.len()
            )));
        }
        let parse = |i: usize| -> Result<f64> {
            record[i]
                .parse()
                .map_err(|e| Error::config(format!("bad summary cell '{}': {e}", &record[i])))
        };
        rows.push(SummaryRow {
            dataset: record[0].to_owned(),
            model: record[1].to_owned(),
            horizon: parse(2)? as usize,
            mse: parse(3)?,
            mae: parse(4)?,
            params: parse(5)? as usize,
            epochs: parse(6)? as usize,
            w1: parse_opt(&record[7])?,
            w4: parse_opt(&record[8])?,
            w16: parse_opt(&record[9])?,
            alpha: parse_opt(&record[10])?,
            trend_blend: parse_opt(&record[11])?,
        });
    }
    Ok(rows)
}

fn format_thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    out
}

const MISSING: &str = "–";

fn find<'a>(
    reports: &'a [&RunReport],
    dataset: &str,
    label: &str,
    horizon: usize,
) -> Option<&'a RunReport> {
    reports
        .iter()
        .find(|r| {
            r.spec.dataset == dataset && r.spec.label == label && r.spec.model.horizon() == horizon
        })
        .copied()
}

fn model_column_order(reports: &[&RunReport]) -> Vec<String> {
    let canonical = [LABEL_MSMIXER, LABEL_DLINEAR, LABEL_NLINEAR];
    let present: BTreeSet<&str> = reports.iter().map(|r| r.spec.label.as_str()).collect();
    let mut cols: Vec<String> = canonical
        .iter()
        .filter(|l| present.contains(**l))
        .map(|l| (*l).to_owned())
        .collect();
    for label in present {
        if !canonical.contains(&label) {
            cols.push(label.to_owned());
        }
    }
    cols
}

/// Benchmark results in the paper's main-table shape: one row per
/// (dataset, horizon), MSE/MAE per model, best MSE bold, plus an average row
/// for every model with a complete column.
pub fn results_table_markdown(reports: &[&RunReport]) -> String {
    let models = model_column_order(reports);
    let datasets: BTreeSet<String> = reports.iter().map(|r| r.spec.dataset.clone()).collect();
    let horizons: BTreeSet<usize> = reports.iter().map(|r| r.spec.model.horizon()).collect();

    let mut out = String::new();
    out.push_str("| Dataset | H |");
    for m in &models {
        out.push_str(&format!(" {m} MSE | {m} MAE |"));
    }
    out.push('\n');
    out.push_str("|---|---|");
    for _ in &models {
        out.push_str("---|---|");
    }
    out.push('\n');

    let mut sums = vec![(0.0f64, 0.0f64, 0usize); models.len()];
    let mut n_rows = 0usize;
    for dataset in &datasets {
        for &horizon in &horizons {
            let cells: Vec<Option<&RunReport>> = models
                .iter()
                .map(|m| find(reports, dataset, m, horizon))
                .collect();
            if cells.iter().all(Option::is_none) {
                continue;
            }
            n_rows += 1;
            let best = cells
                .iter()
                .flatten()
                .map(|r| r.metrics.mse)
                .fold(f64::INFINITY, f64::min);
            out.push_str(&format!("| {dataset} | {horizon} |"));
            for (i, cell) in cells.iter().enumerate() {
                match cell {
                    Some(r) => {
                        let mse = r.metrics.mse;
                        let mse_txt = if mse == best {
                            format!("**{mse:.3}**")
                        } else {
                            format!("{mse:.3}")
                        };
                        out.push_str(&format!(" {mse_txt} | {:.3} |", r.metrics.mae));
                        sums[i].0 += mse;
                        sums[i].1 += r.metrics.mae;
                        sums[i].2 += 1;
                    }
                    None => out.push_str(&format!(" {MISSING} | {MISSING} |")),
                }
            }
            out.push('\n');
        }
    }

    // Average row over models with complete columns.
    let averages: Vec<Option<(f64, f64)>> = sums
        .iter()
        .map(|(mse, mae, n)| {
            (*n == n_rows && n_rows > 0).then(|| (mse / *n as f64, mae / *n as f64))
        })
        .collect();
    let best_avg = averages
        .iter()
        .flatten()
        .map(|(mse, _)| *mse)
        .fold(f64::INFINITY, f64::min);
    out.push_str("| **Average** | |");
    for avg in &averages {
        match avg {
            Some((mse, mae)) => {
                let mse_txt = if *mse == best_avg {
                    format!("**{mse:.3}**")
                } else {
                    format!("{mse:.3}")
                };
                out.push_str(&format!(" {mse_txt} | {mae:.3} |"));
            }
            None => out.push_str(&format!(" {MISSING} | {MISSING} |")),
        }
    }
    out.push('\n');
    out
}

/// Converged gate weights per dataset at one horizon (the paper's
/// scale-weight table shape).
pub fn gate_weights_table_markdown(reports: &[&RunReport], horizon: usize) -> String {
    let datasets: BTreeSet<String> = reports
        .iter()
        .filter(|r| r.spec.label == LABEL_MSMIXER && r.spec.model.horizon() == horizon)
        .map(|r| r.spec.dataset.clone())
        .collect();
    let mut out = String::from("| Dataset | w1 (1x) | w4 (4x) | w16 (16x) |\n|---|---|---|---|\n");
    for dataset in &datasets {
        let report = find(reports, dataset, LABEL_MSMIXER, horizon);
        let cell = |scale: usize| -> String {
            report
                .and_then(|r| r.gate_weight_for(scale))
                .map(|w| format!("{w:.2}"))
                .unwrap_or_else(|| MISSING.to_owned())
        };
        out.push_str(&format!(
            "| {dataset} | {} | {} | {} |\n",
            cell(1),
            cell(4),
            cell(16)
        ));
    }
    out
}

/// Converged fusion weight α per dataset and horizon (the paper's
/// fusion-weight table shape).
pub fn fusion_table_markdown(reports: &[&RunReport]) -> String {
    let msmixer: Vec<&&RunReport> = reports
        .iter()
        .filter(|r| r.spec.label == LABEL_MSMIXER)
        .collect();
    let datasets: BTreeSet<String> = msmixer.iter().map(|r| r.spec.dataset.clone()).collect();
    let horizons: BTreeSet<usize> = msmixer.iter().map(|r| r.spec.model.horizon()).collect();
    let mut out = String::from("| Dataset |");
    for h in &horizons {
        out.push_str(&format!(" H={h} |"));
    }
    out.push('\n');
    out.push_str("|---|");
    for _ in &horizons {
        out.push_str("---|");
    }
    out.push('\n');
    for dataset in &datasets {
        out.push_str(&format!("| {dataset} |"));
        for &h in &horizons {
            let cell = find(reports, dataset, LABEL_MSMIXER, h)
                .and_then(|r| r.diagnostics.fusion_alpha)
                .map(|a| format!("{a:.2}"))
                .unwrap_or_else(|| MISSING.to_owned());
            out.push_str(&format!(" {cell} |"));
        }
        out.push('\n');
    }
    out
}

/// Ablation rows in the paper's variant-table shape, in the canonical variant order.
pub fn ablation_table_markdown(reports: &[&RunReport]) -> String {
    let variants: [(&str, &str); 6] = [
        (LABEL_MSMIXER, "Full model"),
        (LABEL_NO_SHORTCUT, "w/o DLinear shortcut"),
        (LABEL_SCALE1, "Scale 1x only (no pooling)"),
        (LABEL_SCALES14, "Scales {1,4} only"),
        (LABEL_DLINEAR, "Single DLinear (no branches)"),
        (LABEL_NO_REVIN, "w/o RevIN"),
    ];
    let mut out = String::from("| Variant | MSE | MAE | Params |\n|---|---|---|---|\n");
    for (label, display) in variants {
        match reports.iter().find(|r| r.spec.label == label) {
            Some(r) => out.push_str(&format!(
                "| {display} | {:.3} | {:.3} | {} |\n",
                r.metrics.mse,
                r.metrics.mae,
                format_thousands(r.diagnostics.param_total)
            )),
            None => out.push_str(&format!(
                "| {display} | {MISSING} | {MISSING} | {MISSING} |\n"
            )),
        }
    }
    out
}

/// Look-back sensitivity rows (one per lookback, ascending).
pub fn lookback_table_markdown(reports: &[&RunReport]) -> String {
    let mut rows: Vec<&&RunReport> = reports.iter().collect();
    rows.sort_by_key(|r| r.spec.model.lookback());
    let mut out = String::from("| T | MSE | MAE | Params |\n|---|---|---|---|\n");
    for r in rows {
        out.push_str(&format!(
            "| {} | {:.3} | {:.3} | {} |\n",
            r.spec.model.lookback(),
            r.metrics.mse,
            r.metrics.mae,
            format_thousands(r.diagnostics.param_total)
        ));
    }
    out
}

/// Scale-set sensitivity rows (one per scale set, by cardinality).
pub fn scales_table_markdown(reports: &[&RunReport]) -> String {
    let scale_set = |r: &RunReport| -> Vec<usize> {
        match &r.spec.model {
            ModelConfig::MsMixer(cfg) => cfg.scales.clone(),
            _ => Vec::new(),
        }
    };
    let mut rows: Vec<&&RunReport> = reports.iter().collect();
    rows.sort_by_key(|r| (scale_set(r).len(), scale_set(r)));
    let mut out = String::from("| |S| | Scales | MSE | MAE | Params |\n|---|---|---|---|---|\n");
    for r in rows {
        let scales = scale_set(r);
        let display = scales
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(",");
        out.push_str(&format!(
            "| {} | {{{display}}} | {:.3} | {:.3} | {} |\n",
            scales.len(),
            r.metrics.mse,
            r.metrics.mae,
            format_thousands(r.diagnostics.param_total)
        ));
    }
    out
}
