//! Option resolution: CLI flags override config-file keys override built-in
//! defaults (the benchmark protocol values).

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;

/// Flags shared by every command. All optional; resolution fills in defaults.
#[derive(Args, Debug, Default, Clone)]
pub struct CommonArgs {
    /// Dataset name under --data-dir (e.g. ETTh1), or a path to a CSV file
    #[arg(long)]
    pub dataset: Option<String>,

    /// Directory holding the benchmark CSVs
    #[arg(long)]
    pub data_dir: Option<PathBuf>,

    /// Model kind: msmixer | dlinear | nlinear
    #[arg(long)]
    pub model: Option<String>,

    /// Forecast horizon H
    #[arg(long)]
    pub horizon: Option<usize>,

    /// Look-back window T
    #[arg(long)]
    pub lookback: Option<usize>,

    /// Comma-separated pooling factors, e.g. 1,4,16
    #[arg(long)]
    pub scales: Option<String>,

    /// Branch hidden width d
    #[arg(long)]
    pub hidden: Option<usize>,

    /// Run seed
    #[arg(long)]
    pub seed: Option<u64>,

    /// Cap the train range to its first N steps; 0 disables the cap
    /// (default: 17420 on ETTm datasets, uncapped otherwise)
    #[arg(long)]
    pub train_cap: Option<usize>,

    /// Drop the fusion scalar and forecast from the multi-scale pathway alone
    #[arg(long)]
    pub no_shortcut: bool,

    /// Replace the per-window instance normalization with the identity
    #[arg(long)]
    pub no_revin: bool,

    /// Output directory for run artifacts
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Worker pool size for grid commands
    #[arg(long)]
    pub workers: Option<usize>,

    /// Flat key = value config file; flags override its values
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Fully resolved options.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub dataset: Option<String>,
    pub data_dir: PathBuf,
    pub model: String,
    pub horizon: usize,
    pub lookback: usize,
    pub scales: Vec<usize>,
    pub hidden: usize,
    pub seed: u64,
    /// Raw cap request; `Some(0)` means "explicitly uncapped".
    pub train_cap: Option<usize>,
    pub no_shortcut: bool,
    pub no_revin: bool,
    pub out: PathBuf,
    pub workers: usize,
}

impl Resolved {
    /// Effective cap for a dataset: explicit flag/config wins (0 disables),
    /// otherwise ETTm datasets default to the protocol cap.
    pub fn cap_for(&self, dataset: &str) -> Option<usize> {
        match self.train_cap {
            Some(0) => None,
            Some(cap) => Some(cap),
            None => dataset.starts_with("ETTm").then_some(17_420),
        }
    }
}

/// Parse a flat `key = value` file; `#` starts a comment. Keys may use `-`
/// or `_` and mirror the flag names.
pub fn parse_config_file(path: &Path) -> Result<HashMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let mut map = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!(
                "{}:{}: expected 'key = value', got '{line}'",
                path.display(),
                lineno + 1
            );
        };
        map.insert(key.trim().replace('-', "_"), value.trim().to_owned());
    }
    Ok(map)
}

pub fn parse_scales(text: &str) -> Result<Vec<usize>> {
    let scales: Vec<usize> = text
        .split(',')
        .map(|s| s.trim().parse::<usize>().with_context(|| format!("bad scale '{s}'")))
        .collect::<Result<_>>()?;
    if scales.is_empty() {
        bail!("scales must list at least one pooling factor");
    }
    Ok(scales)
}

fn parse_bool(key: &str, text: &str) -> Result<bool> {
    match text {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        other => bail!("config key '{key}' has non-boolean value '{other}'"),
    }
}

/// Apply precedence: CLI flag, then config key, then default.
pub fn resolve(args: &CommonArgs) -> Result<Resolved> {
    let file = match &args.config {
        Some(path) => parse_config_file(path)?,
        None => HashMap::new(),
    };
    let get = |key: &str| file.get(key).map(String::as_str);
    let parse_num = |key: &str| -> Result<Option<usize>> {
        get(key)
            .map(|v| v.parse::<usize>().with_context(|| format!("config key '{key}': bad value '{v}'")))
            .transpose()
    };

    let scales = match (&args.scales, get("scales")) {
        (Some(flag), _) => parse_scales(flag)?,
        (None, Some(cfg)) => parse_scales(cfg)?,
        (None, None) => vec![1, 4, 16],
    };

    Ok(Resolved {
        dataset: args
            .dataset
            .clone()
            .or_else(|| get("dataset").map(str::to_owned)),
        data_dir: args
            .data_dir
            .clone()
            .or_else(|| get("data_dir").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("data")),
        model: args
            .model
            .clone()
            .or_else(|| get("model").map(str::to_owned))
            .unwrap_or_else(|| "msmixer".to_owned()),
        horizon: args.horizon.or(parse_num("horizon")?).unwrap_or(96),
        lookback: args.lookback.or(parse_num("lookback")?).unwrap_or(336),
        scales,
        hidden: args.hidden.or(parse_num("hidden")?).unwrap_or(64),
        seed: args
            .seed
            .or(get("seed")
                .map(|v| v.parse::<u64>().with_context(|| format!("config key 'seed': bad value '{v}'")))
                .transpose()?)
            .unwrap_or(42),
        train_cap: args.train_cap.or(parse_num("train_cap")?),
        no_shortcut: args.no_shortcut
            || get("no_shortcut").map(|v| parse_bool("no_shortcut", v)).transpose()?.unwrap_or(false),
        no_revin: args.no_revin
            || get("no_revin").map(|v| parse_bool("no_revin", v)).transpose()?.unwrap_or(false),
        out: args
            .out
            .clone()
            .or_else(|| get("out").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("runs")),
        workers: args.workers.or(parse_num("workers")?).unwrap_or(1).max(1),
    })
}
