//! Run construction and execution: a single run writes its report,
//! checkpoint, and trace into its own directory; the grid runner fans
//! specs over a worker pool and records failures without stopping.

use std::fs;
use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{anyhow, bail, Context, Result};

use msmixer_core::data;
use msmixer_core::models::checkpoint::save_checkpoint;
use msmixer_core::models::{DLinearConfig, MsMixerConfig, NLinearConfig};
use msmixer_core::report::{trace_to_csv, RunReport, RunSpec};
use msmixer_core::{evaluate, extract_diagnostics, train, ModelConfig, TrainConfig};

use crate::config::Resolved;

/// Resolve a dataset argument into (name, csv path): either a bare name under
/// `data_dir` or a direct path to a CSV file.
pub fn dataset_location(dataset: &str, data_dir: &Path) -> (String, PathBuf) {
    let as_path = Path::new(dataset);
    if as_path.extension().is_some_and(|e| e == "csv") {
        let name = as_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| dataset.to_owned());
        (name, as_path.to_path_buf())
    } else {
        (dataset.to_owned(), data_dir.join(format!("{dataset}.csv")))
    }
}

/// Count the variates of a CSV from its header alone.
pub fn peek_variate_count(path: &Path) -> Result<usize> {
    let file = fs::File::open(path)
        .map_err(|e| anyhow!("failed to load {}: {e}", path.display()))?;
    let mut header = String::new();
    std::io::BufReader::new(file)
        .read_line(&mut header)
        .with_context(|| format!("failed to read header of {}", path.display()))?;
    let columns = header.trim_end().split(',').count();
    if columns < 2 {
        bail!("{}: expected a date column plus at least one variate", path.display());
    }
    Ok(columns - 1)
}

const DEFAULT_KERNEL: usize = 25;

/// Report label for an msmixer variant; ablation variants map one-to-one.
pub fn variant_label(scales: &[usize], no_shortcut: bool, no_revin: bool) -> String {
    let mut label = String::from("msmixer");
    if scales != [1, 4, 16] {
        label.push_str("-s");
        for s in scales {
            label.push_str(&s.to_string());
        }
    }
    if no_shortcut {
        label.push_str("-noshortcut");
    }
    if no_revin {
        label.push_str("-norevin");
    }
    label
}

/// Build the run spec for one (dataset, model) pair from resolved options.
pub fn build_spec(opts: &Resolved, dataset: &str, model_kind: &str) -> Result<RunSpec> {
    let (name, path) = dataset_location(dataset, &opts.data_dir);
    let n_variates = peek_variate_count(&path)?;
    let (label, model) = match model_kind {
        "msmixer" => {
            let cfg = MsMixerConfig {
                lookback: opts.lookback,
                horizon: opts.horizon,
                hidden: opts.hidden,
                n_variates,
                scales: opts.scales.clone(),
                kernel: DEFAULT_KERNEL,
                dropout: 0.1,
                use_revin: !opts.no_revin,
                use_shortcut_fusion: !opts.no_shortcut,
            };
            cfg.validate()
                .map_err(|e| anyhow!("invalid spec: {e} (check --lookback/--scales)"))?;
            (
                variant_label(&opts.scales, opts.no_shortcut, opts.no_revin),
                ModelConfig::MsMixer(cfg),
            )
        }
        "dlinear" => (
            "dlinear".to_owned(),
            ModelConfig::DLinear(DLinearConfig {
                lookback: opts.lookback,
                horizon: opts.horizon,
                kernel: DEFAULT_KERNEL,
            }),
        ),
        "nlinear" => (
            "nlinear".to_owned(),
            ModelConfig::NLinear(NLinearConfig {
                lookback: opts.lookback,
                horizon: opts.horizon,
            }),
        ),
        other => bail!("invalid spec: unknown model '{other}' (field --model accepts msmixer, dlinear, nlinear)"),
    };
    Ok(RunSpec {
        dataset: name.clone(),
        data_path: path,
        label,
        model,
        train: TrainConfig {
            seed: opts.seed,
            ..TrainConfig::default()
        },
        train_cap: opts.cap_for(&name),
    })
}

/// Execute one run end to end and write `report.json`, `checkpoint.json`,
/// and `trace.csv` into `<out>/<dataset>_<label>_<H>_<seed>/`.
pub fn run_one(spec: &RunSpec, out_dir: &Path) -> Result<RunReport> {
    let series = data::load_csv(&spec.data_path)?;
    let split = data::make_splits(
        &series,
        spec.model.lookback(),
        spec.model.horizon(),
        spec.train_cap,
    )?;
    let ds = data::fit_apply_zscore(&series, split)?;
    let mut model = spec.model.build(spec.train.seed)?;
    let trace = train(model.as_mut(), &ds, &spec.train)?;
    let metrics = evaluate(
        model.as_mut(),
        &ds,
        &ds.split.test.clone(),
        spec.train.batch_size,
    )?;
    let diagnostics = extract_diagnostics(model.as_ref(), trace.epochs_run());

    let report = RunReport {
        spec: spec.clone(),
        metrics,
        diagnostics,
        trace,
    };

    let run_dir = out_dir.join(spec.run_dir_name());
    fs::create_dir_all(&run_dir)
        .with_context(|| format!("cannot create run directory {}", run_dir.display()))?;
    report.save(run_dir.join("report.json"))?;
    save_checkpoint(model.as_ref(), run_dir.join("checkpoint.json"))?;
    fs::write(run_dir.join("trace.csv"), trace_to_csv(&report.trace))?;
    Ok(report)
}

/// One grid entry outcome; failures carry the failing spec for reporting.
pub struct GridOutcome {
    pub spec: RunSpec,
    pub result: Result<RunReport>,
}

/// Run every spec on a pool of `workers` threads. Results come back in spec
/// order; failures are recorded, never fatal.
pub fn run_grid(specs: Vec<RunSpec>, out_dir: &Path, workers: usize) -> Vec<GridOutcome> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<RunReport>>>> =
        Mutex::new((0..specs.len()).map(|_| None).collect());

    std::thread::scope(|scope| {
        for _ in 0..workers.max(1) {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::SeqCst);
                if idx >= specs.len() {
                    break;
                }
                let spec = &specs[idx];
                eprintln!(
                    "[grid] {} ({} of {})",
                    spec.run_dir_name(),
                    idx + 1,
                    specs.len()
                );
                let outcome = run_one(spec, out_dir);
                results.lock().unwrap()[idx] = Some(outcome);
            });
        }
    });

    specs
        .into_iter()
        .zip(results.into_inner().unwrap())
        .map(|(spec, result)| GridOutcome {
            spec,
            result: result.expect("every grid slot filled"),
        })
        .collect()
}
