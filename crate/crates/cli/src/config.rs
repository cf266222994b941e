//! Flat key=value configuration with command-line override precedence.
//!
//! A config file holds `key = value` lines (`#` comments allowed). Every
//! key must be known; command-line flags override file values. The
//! resolved configuration actually used by a subcommand is printed to
//! stderr so a run is reproducible from its log.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};

/// Every key a config file may set.
pub const KNOWN_KEYS: &[&str] = &[
    "evs",
    "days",
    "seed",
    "attack_seed",
    "max_speed_mph",
    "fix_interval_secs",
    "train_fraction",
    "valid_fraction",
    "adasyn_k",
    "adasyn_xi",
    "adasyn_ratio_threshold",
    "liars",
    "beta",
    "capacity",
    "slots",
    "epsilon",
    "battery_units",
    "arch",
    "layers",
    "units",
    "hidden_activation",
    "optimizer",
    "init",
    "dropout",
    "max_norm",
    "learning_rate",
    "batch_size",
    "epochs",
    "loss",
    "population",
    "generations",
    "crossover_rate",
    "mutation_rate",
];

/// Values loaded from a config file.
#[derive(Debug, Default)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<FileConfig> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("{}:{}: expected `key = value`", path.display(), i + 1);
            };
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                bail!("{}:{}: unknown config key {key:?}", path.display(), i + 1);
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(FileConfig { values })
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

/// Resolves one parameter (CLI flag beats config file beats default) and
/// records it for the resolved-config printout.
pub struct Resolver<'a> {
    file: &'a FileConfig,
    resolved: BTreeMap<String, String>,
}

impl<'a> Resolver<'a> {
    pub fn new(file: &'a FileConfig) -> Self {
        Resolver {
            file,
            resolved: BTreeMap::new(),
        }
    }

    pub fn get<T>(&mut self, key: &'static str, cli: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + Display + Clone,
        <T as FromStr>::Err: Display,
    {
        debug_assert!(KNOWN_KEYS.contains(&key), "unregistered key {key}");
        let value = if let Some(v) = cli {
            v
        } else if let Some(raw) = self.file.raw(key) {
            raw.parse::<T>()
                .map_err(|e| anyhow::anyhow!("config key {key}: {e}"))?
        } else {
            default
        };
        self.resolved.insert(key.to_string(), value.to_string());
        Ok(value)
    }

    /// Prints `key = value` lines for everything this run resolved.
    pub fn print(&self, subcommand: &str) {
        eprintln!("# resolved config for `{subcommand}`");
        for (key, value) in &self.resolved {
            eprintln!("{key} = {value}");
        }
    }
}
