//! `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are unique.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> CliResult<Config> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", idx + 1)))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(CliError::Config(format!("line {}: empty key", idx + 1)));
            }
            if entries.insert(key.to_owned(), value.trim().to_owned()).is_some() {
                return Err(CliError::Config(format!("line {}: duplicate key {key:?}", idx + 1)));
            }
        }
        Ok(Config { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn require<T: FromStr>(&self, key: &str) -> CliResult<T> {
        let raw = self.get(key).ok_or_else(|| CliError::Config(format!("missing key {key:?}")))?;
        parse_value(key, raw)
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> CliResult<T> {
        match self.get(key) {
            Some(raw) => parse_value(key, raw),
            None => Ok(default),
        }
    }

    /// Comma-separated list; an empty value gives an empty list.
    pub fn list(&self, key: &str) -> Vec<String> {
        self.get(key)
            .map(|v| v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::to_owned).collect())
            .unwrap_or_default()
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Entries in key order, suitable for recording in a manifest.
    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }
}

fn parse_value<T: FromStr>(key: &str, raw: &str) -> CliResult<T> {
    raw.parse().map_err(|_| CliError::Config(format!("invalid value for {key:?}: {raw:?}")))
}
