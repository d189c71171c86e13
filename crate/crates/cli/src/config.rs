//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};

pub const KEYS: &[&str] = &[
    "train_tsv",
    "val_tsv",
    "test_tsv",
    "emoticon_table",
    "lexicon",
    "vocab",
    "model",
    "output_dir",
    "predictions",
    "n_train",
    "n_val",
    "max_vocab",
    "max_epochs",
    "batch_size",
    "seed",
    "class_weights",
    "embed_dim",
    "hidden1",
    "hidden2",
    "hidden3",
    "dropout",
];

const PATH_KEYS: &[&str] = &[
    "train_tsv",
    "val_tsv",
    "test_tsv",
    "emoticon_table",
    "lexicon",
    "vocab",
    "model",
    "output_dir",
    "predictions",
];

/// Parsed configuration. Relative paths are resolved against the config
/// file's directory.
#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
    base: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str, base: PathBuf) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", n + 1))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                bail!("line {}: unknown key `{key}`", n + 1);
            }
            if values.insert(key.to_string(), value.to_string()).is_some() {
                bail!("line {}: duplicate key `{key}`", n + 1);
            }
        }
        Ok(Self { values, base })
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        debug_assert!(KEYS.contains(&key));
        self.values.insert(key.to_string(), value.to_string());
    }

    pub fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn path(&self, key: &str) -> Result<PathBuf> {
        self.opt_path(key)?.ok_or_else(|| anyhow!("missing config key `{key}`"))
    }

    pub fn opt_path(&self, key: &str) -> Result<Option<PathBuf>> {
        debug_assert!(PATH_KEYS.contains(&key));
        Ok(self.values.get(key).map(|v| self.base.join(v)))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.opt(key)?.ok_or_else(|| anyhow!("missing config key `{key}`"))
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.opt(key)?.unwrap_or(default))
    }

    pub fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.values
            .get(key)
            .map(|v| {
                v.parse()
                    .map_err(|e| anyhow!("config key `{key}`: invalid value `{v}`: {e}"))
            })
            .transpose()
    }
}
