//! Flat key=value config files and the flag > config > default precedence.
//!
//! Keys are the long flag names (`epochs=50`, `d-model=64`). Unknown keys
//! are rejected so a typo cannot silently fall back to a default. The seed
//! additionally falls back to the `CENTRIFUGE_SEED` environment variable
//! when neither flag nor config provides one.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};

pub const SEED_ENV: &str = "CENTRIFUGE_SEED";

/// Keys any command may consult.
const KNOWN_KEYS: &[&str] = &[
    "batch",
    "beta",
    "block-size",
    "blocks",
    "cap",
    "d-model",
    "epochs",
    "ffn",
    "folds",
    "generators",
    "heads",
    "jobs",
    "length",
    "lr",
    "momentum",
    "regime",
    "samples-per-label",
    "seed",
    "smoothing",
    "stride",
    "styles",
    "sub-labels",
    "weight-decay",
];

#[derive(Debug, Clone, Default)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut values = BTreeMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config file {}", path.display()))?;
            for (lineno, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let Some((key, value)) = line.split_once('=') else {
                    bail!(
                        "{}:{}: expected key=value, got '{line}'",
                        path.display(),
                        lineno + 1
                    );
                };
                let key = key.trim().to_string();
                if !KNOWN_KEYS.contains(&key.as_str()) {
                    bail!(
                        "{}:{}: unknown config key '{key}'",
                        path.display(),
                        lineno + 1
                    );
                }
                values.insert(key, value.trim().to_string());
            }
        }
        Ok(FileConfig { values })
    }

    /// Flag value if given, else config value, else the default.
    pub fn pick<T>(&self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        debug_assert!(KNOWN_KEYS.contains(&key), "unknown key {key}");
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.values.get(key) {
            Some(raw) => raw
                .parse()
                .map_err(|e| anyhow::anyhow!("config key '{key}': {e}")),
            None => Ok(default),
        }
    }

    /// Like [`pick`], but with no default: returns None when absent.
    pub fn pick_opt<T>(&self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        if let Some(v) = flag {
            return Ok(Some(v));
        }
        match self.values.get(key) {
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| anyhow::anyhow!("config key '{key}': {e}")),
            None => Ok(None),
        }
    }

    /// Seed precedence: flag, config file, CENTRIFUGE_SEED, then 0.
    pub fn seed(&self, flag: Option<u64>) -> Result<u64> {
        if let Some(s) = flag {
            return Ok(s);
        }
        if let Some(raw) = self.values.get("seed") {
            return raw
                .parse()
                .map_err(|e| anyhow::anyhow!("config key 'seed': {e}"));
        }
        if let Ok(raw) = std::env::var(SEED_ENV) {
            return raw
                .parse()
                .with_context(|| format!("environment variable {SEED_ENV}"));
        }
        Ok(0)
    }
}
