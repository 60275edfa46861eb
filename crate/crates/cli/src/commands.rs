//! The five commands: single runs, the 4×4×3 benchmark grid, the ablation
//! and sensitivity suites, and report regeneration from stored run dirs.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

use msmixer_core::report::{
    ablation_table_markdown, fusion_table_markdown, gate_weights_table_markdown,
    lookback_table_markdown, results_table_markdown, scales_table_markdown, write_summary_csv,
    RunReport, LABEL_DLINEAR, LABEL_MSMIXER, LABEL_NLINEAR,
};

use crate::config::Resolved;
use crate::runner::{build_spec, dataset_location, run_grid, run_one, GridOutcome};

pub const BENCHMARK_DATASETS: [&str; 4] = ["ETTh1", "ETTh2", "ETTm1", "ETTm2"];
pub const BENCHMARK_HORIZONS: [usize; 4] = [96, 192, 336, 720];
pub const BENCHMARK_MODELS: [&str; 3] = ["msmixer", "dlinear", "nlinear"];

fn require_dataset(opts: &Resolved) -> Result<String> {
    opts.dataset
        .clone()
        .ok_or_else(|| anyhow::anyhow!("invalid spec: missing required field --dataset"))
}

fn print_report_line(report: &RunReport) {
    println!(
        "{}: test MSE {:.3}, MAE {:.3}, params {}, epochs {}",
        report.spec.run_dir_name(),
        report.metrics.mse,
        report.metrics.mae,
        report.diagnostics.param_total,
        report.diagnostics.epochs_run
    );
}

/// `train`: one run, one run directory.
pub fn cmd_train(opts: &Resolved) -> Result<()> {
    let dataset = require_dataset(opts)?;
    let spec = build_spec(opts, &dataset, &opts.model)?;
    let report = run_one(&spec, &opts.out)?;
    print_report_line(&report);
    println!("report written to {}", opts.out.join(spec.run_dir_name()).display());
    Ok(())
}

fn emit_grid_tables(out: &Path, outcomes: &[GridOutcome]) -> Result<Vec<RunReport>> {
    let reports: Vec<RunReport> = outcomes
        .iter()
        .filter_map(|o| o.result.as_ref().ok().cloned())
        .collect();
    let refs: Vec<&RunReport> = reports.iter().collect();
    fs::create_dir_all(out)?;
    fs::write(out.join("summary.csv"), write_summary_csv(&refs))?;
    fs::write(out.join("results.md"), results_table_markdown(&refs))?;
    fs::write(
        out.join("gate_weights.md"),
        gate_weights_table_markdown(&refs, 96),
    )?;
    fs::write(out.join("fusion_weights.md"), fusion_table_markdown(&refs))?;

    let failures: Vec<&GridOutcome> = outcomes.iter().filter(|o| o.result.is_err()).collect();
    let mut failure_log = String::from("run,error\n");
    for f in &failures {
        let err = f.result.as_ref().err().map(ToString::to_string).unwrap_or_default();
        failure_log.push_str(&format!(
            "{},\"{}\"\n",
            f.spec.run_dir_name(),
            err.replace('"', "'").replace('\n', " ")
        ));
    }
    fs::write(out.join("failures.csv"), failure_log)?;
    for f in &failures {
        eprintln!(
            "FAILED {}: {}",
            f.spec.run_dir_name(),
            f.result.as_ref().err().map(ToString::to_string).unwrap_or_default()
        );
    }
    if !failures.is_empty() {
        bail!(
            "{} of {} runs failed; see {}",
            failures.len(),
            outcomes.len(),
            out.join("failures.csv").display()
        );
    }
    Ok(reports)
}

/// Spec list for the full benchmark grid (datasets × horizons × models).
pub fn benchmark_grid_specs(opts: &Resolved) -> Result<Vec<msmixer_core::report::RunSpec>> {
    let mut specs = Vec::new();
    for dataset in BENCHMARK_DATASETS {
        for horizon in BENCHMARK_HORIZONS {
            for model in BENCHMARK_MODELS {
                let per_run = Resolved {
                    horizon,
                    ..opts.clone()
                };
                specs.push(build_spec(&per_run, dataset, model)?);
            }
        }
    }
    Ok(specs)
}

/// `benchmark`: the full 48-run grid plus the main-results tables. Failed
/// runs are recorded and the rest of the grid continues.
pub fn cmd_benchmark(opts: &Resolved) -> Result<()> {
    let specs = benchmark_grid_specs(opts)?;
    let outcomes = run_grid(specs, &opts.out, opts.workers);
    let reports = emit_grid_tables(&opts.out, &outcomes)?;
    for report in &reports {
        print_report_line(report);
    }
    println!("benchmark tables written to {}", opts.out.display());
    Ok(())
}

/// `ablate`: the six component variants on one dataset/horizon.
pub fn cmd_ablate(opts: &Resolved) -> Result<()> {
    let dataset = require_dataset(opts)?;
    let base = Resolved {
        scales: vec![1, 4, 16],
        no_shortcut: false,
        no_revin: false,
        ..opts.clone()
    };
    let variants: Vec<Resolved> = vec![
        base.clone(),
        Resolved {
            no_shortcut: true,
            ..base.clone()
        },
        Resolved {
            scales: vec![1],
            ..base.clone()
        },
        Resolved {
            scales: vec![1, 4],
            ..base.clone()
        },
        Resolved {
            model: "dlinear".to_owned(),
            ..base.clone()
        },
        Resolved {
            no_revin: true,
            ..base.clone()
        },
    ];
    let specs = variants
        .iter()
        .map(|v| build_spec(v, &dataset, &v.model))
        .collect::<Result<Vec<_>>>()?;

    let (dataset_name, _) = dataset_location(&dataset, &opts.data_dir);
    let out = opts.out.join(format!("ablation_{dataset_name}_{}", opts.horizon));
    let outcomes = run_grid(specs, &out, opts.workers);
    let reports: Vec<RunReport> = outcomes
        .iter()
        .filter_map(|o| o.result.as_ref().ok().cloned())
        .collect();
    let refs: Vec<&RunReport> = reports.iter().collect();
    fs::create_dir_all(&out)?;
    fs::write(out.join("ablation.md"), ablation_table_markdown(&refs))?;
    fs::write(out.join("summary.csv"), write_summary_csv(&refs))?;
    let failed = outcomes.iter().filter(|o| o.result.is_err()).count();
    for report in &reports {
        print_report_line(report);
    }
    println!("ablation table written to {}", out.join("ablation.md").display());
    if failed > 0 {
        bail!("{failed} of {} ablation runs failed", outcomes.len());
    }
    Ok(())
}

pub const SENSITIVITY_LOOKBACKS: [usize; 4] = [96, 192, 336, 512];
pub const SENSITIVITY_SCALE_SETS: [&[usize]; 4] = [&[1], &[1, 4], &[1, 4, 16], &[1, 2, 4, 16]];

/// `sensitivity`: the look-back sweep and the scale-count sweep.
pub fn cmd_sensitivity(opts: &Resolved) -> Result<()> {
    let dataset = require_dataset(opts)?;
    let (dataset_name, _) = dataset_location(&dataset, &opts.data_dir);
    let out = opts
        .out
        .join(format!("sensitivity_{dataset_name}_{}", opts.horizon));

    let mut lookback_specs = Vec::new();
    for lookback in SENSITIVITY_LOOKBACKS {
        let per_run = Resolved {
            lookback,
            ..opts.clone()
        };
        lookback_specs.push(build_spec(&per_run, &dataset, "msmixer")?);
    }
    let lookback_outcomes = run_grid(lookback_specs, &out.join("lookback"), opts.workers);

    let mut scale_specs = Vec::new();
    for scales in SENSITIVITY_SCALE_SETS {
        let per_run = Resolved {
            scales: scales.to_vec(),
            ..opts.clone()
        };
        scale_specs.push(build_spec(&per_run, &dataset, "msmixer")?);
    }
    let scale_outcomes = run_grid(scale_specs, &out.join("scales"), opts.workers);

    let lookback_reports: Vec<RunReport> = lookback_outcomes
        .iter()
        .filter_map(|o| o.result.as_ref().ok().cloned())
        .collect();
    let scale_reports: Vec<RunReport> = scale_outcomes
        .iter()
        .filter_map(|o| o.result.as_ref().ok().cloned())
        .collect();
    fs::create_dir_all(&out)?;
    let lookback_refs: Vec<&RunReport> = lookback_reports.iter().collect();
    let scale_refs: Vec<&RunReport> = scale_reports.iter().collect();
    fs::write(out.join("lookback.md"), lookback_table_markdown(&lookback_refs))?;
    fs::write(out.join("scales.md"), scales_table_markdown(&scale_refs))?;
    let all: Vec<&RunReport> = lookback_refs.iter().chain(scale_refs.iter()).copied().collect();
    fs::write(out.join("summary.csv"), write_summary_csv(&all))?;

    for report in lookback_reports.iter().chain(&scale_reports) {
        print_report_line(report);
    }
    println!("sensitivity tables written to {}", out.display());
    let failed = lookback_outcomes
        .iter()
        .chain(&scale_outcomes)
        .filter(|o| o.result.is_err())
        .count();
    if failed > 0 {
        bail!("{failed} sensitivity runs failed");
    }
    Ok(())
}

fn collect_reports(dir: &Path, found: &mut Vec<RunReport>) -> Result<()> {
    for entry in fs::read_dir(dir).with_context(|| format!("cannot read {}", dir.display()))? {
        let path = entry?.path();
        if path.is_dir() {
            collect_reports(&path, found)?;
        } else if path.file_name().is_some_and(|n| n == "report.json") {
            found.push(RunReport::load(&path)?);
        }
    }
    Ok(())
}

/// `report`: deterministically regenerate the summary tables from every
/// `report.json` stored under the run directory.
pub fn cmd_report(run_dir: &Path) -> Result<()> {
    let mut reports = Vec::new();
    collect_reports(run_dir, &mut reports)?;
    if reports.is_empty() {
        bail!("no report.json files under {}", run_dir.display());
    }
    reports.sort_by(|a, b| {
        (&a.spec.dataset, &a.spec.label, a.spec.model.horizon()).cmp(&(
            &b.spec.dataset,
            &b.spec.label,
            b.spec.model.horizon(),
        ))
    });
    let refs: Vec<&RunReport> = reports.iter().collect();
    let tables = run_dir.join("tables");
    fs::create_dir_all(&tables)?;
    fs::write(tables.join("summary.csv"), write_summary_csv(&refs))?;
    fs::write(tables.join("results.md"), results_table_markdown(&refs))?;
    fs::write(
        tables.join("gate_weights.md"),
        gate_weights_table_markdown(&refs, 96),
    )?;
    fs::write(tables.join("fusion_weights.md"), fusion_table_markdown(&refs))?;

    let has_variants = reports.iter().any(|r| {
        !matches!(
            r.spec.label.as_str(),
            LABEL_MSMIXER | LABEL_DLINEAR | LABEL_NLINEAR
        )
    });
    if has_variants {
        fs::write(tables.join("ablation.md"), ablation_table_markdown(&refs))?;
    }
    println!(
        "regenerated tables for {} runs into {}",
        reports.len(),
        tables.display()
    );
    Ok(())
}
