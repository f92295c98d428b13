//! Run configuration: one TOML file plus command-line overrides, resolved
//! and validated before any work starts.

use std::path::{Path, PathBuf};

use clap::Args;
use evidal::active::{budget_schedule, selection_epochs, ActiveConfig, StrategyKind};
use evidal::data::ShiftBenchmarkConfig;
use evidal::network::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Externally computed features for both domains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvInput {
    pub source: PathBuf,
    pub target: PathBuf,
    pub num_classes: usize,
    #[serde(default = "yes")]
    pub has_header: bool,
}

fn yes() -> bool {
    true
}

/// Everything a command needs. `seed` drives the benchmark generator, the
/// trainer and the selection RNG, and `active.strategy.kappa` is the single
/// source of κ, so the `[train]` and `[benchmark]` tables may not set their
/// own copies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub train: TrainConfig,
    pub active: ActiveConfig,
    pub benchmark: ShiftBenchmarkConfig,
    /// When present, data comes from these files instead of the benchmark.
    pub csv: Option<CsvInput>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            train: TrainConfig::default(),
            active: ActiveConfig::default(),
            benchmark: ShiftBenchmarkConfig::default(),
            csv: None,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML configuration file; built-in defaults when omitted.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Query strategy, e.g. duc_two_round, random, u_data_only.
    #[arg(long, value_name = "NAME")]
    pub strategy: Option<String>,
    /// Fraction of the target set to label in total.
    #[arg(long, value_name = "FRAC")]
    pub budget: Option<f64>,
    /// Number of selection steps R.
    #[arg(long, value_name = "R")]
    pub steps: Option<usize>,
    /// First-round shortlist multiplier κ.
    #[arg(long, value_name = "K")]
    pub kappa: Option<usize>,
    /// Weight β on distribution uncertainty of unlabeled target samples.
    #[arg(long, value_name = "X")]
    pub beta: Option<f64>,
    /// Weight λ on data uncertainty of unlabeled target samples.
    #[arg(long, value_name = "Y")]
    pub lambda: Option<f64>,
}

const DERIVED_KEYS: [(&str, &str, &str); 3] = [
    ("train", "seed", "seed"),
    ("train", "kappa", "active.strategy.kappa"),
    ("benchmark", "seed", "seed"),
];

impl RunConfig {
    pub fn resolve(common: &CommonArgs, overrides: &Overrides) -> Result<Self, CliError> {
        let mut cfg = match &common.config {
            Some(path) => Self::from_file(path)?,
            None => Self::default(),
        };
        if let Some(seed) = common.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &common.out {
            cfg.out = out.clone();
        }
        if let Some(name) = &overrides.strategy {
            cfg.active.strategy.kind = name.parse::<StrategyKind>()?;
        }
        if let Some(b) = overrides.budget {
            cfg.active.budget_fraction = b;
        }
        if let Some(r) = overrides.steps {
            cfg.active.steps = r;
        }
        if let Some(k) = overrides.kappa {
            cfg.active.strategy.kappa = k;
        }
        if let Some(b) = overrides.beta {
            cfg.train.weights.beta = b;
        }
        if let Some(l) = overrides.lambda {
            cfg.train.weights.lambda = l;
        }
        cfg.train.seed = cfg.seed;
        cfg.train.kappa = cfg.active.strategy.kappa;
        cfg.benchmark.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config("config", format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let key = e
                .span()
                .and_then(|s| key_at(text, s.start))
                .unwrap_or_else(|| "config".into());
            CliError::config(key, e.message().trim())
        })?;
        let table: toml::Table = toml::from_str(text).map_err(|e| CliError::config("config", e.message()))?;
        for (section, key, owner) in DERIVED_KEYS {
            if table.get(section).and_then(|t| t.get(key)).is_some() {
                return Err(CliError::config(
                    format!("{section}.{key}"),
                    format!("derived from `{owner}`; set that instead"),
                ));
            }
        }
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        self.train.validate().map_err(|e| {
            CliError::from(e).scoped(|k| match k {
                "beta" | "lambda" => format!("train.weights.{k}"),
                "logit_clamp" => format!("train.evidence.{k}"),
                _ => format!("train.{k}"),
            })
        })?;
        self.active
            .strategy
            .validate()
            .map_err(|e| CliError::from(e).scoped(|k| format!("active.strategy.{k}")))?;
        if self.active.ece.n_bins == 0 {
            return Err(CliError::config("active.ece.n_bins", "must be positive"));
        }
        match &self.csv {
            Some(csv) if csv.num_classes < 2 => {
                return Err(CliError::config("csv.num_classes", "must be >= 2"));
            }
            Some(_) => {}
            None => self
                .benchmark
                .validate()
                .map_err(|e| CliError::from(e).scoped(|k| format!("benchmark.{k}")))?,
        }
        if self.active.budget_fraction != 0.0 {
            selection_epochs(self.train.epochs, self.active.steps)
                .map_err(|e| CliError::from(e).scoped(|k| format!("train.{k}")))?;
            if self.csv.is_none() {
                budget_schedule(self.benchmark.n_target, self.active.budget_fraction, self.active.steps)
                    .map_err(|e| CliError::from(e).scoped(|k| format!("active.{k}")))?;
            }
        }
        Ok(())
    }
}

/// Dotted key on the line containing byte `offset`, qualified by the
/// enclosing `[table]` header.
fn key_at(text: &str, offset: usize) -> Option<String> {
    let mut table = String::new();
    let mut start = 0;
    for line in text.split_inclusive('\n') {
        let t = line.trim();
        let header = t.strip_prefix('[').and_then(|h| h.split(']').next()).map(str::trim);
        if let Some(h) = header {
            table = h.to_string();
        }
        if offset < start + line.len() {
            if header.is_some() {
                return Some(table);
            }
            let key = t.split('=').next()?.trim().trim_matches('"');
            return Some(if table.is_empty() { key.to_string() } else { format!("{table}.{key}") });
        }
        start += line.len();
    }
    None
}
