//! Flat `key = value` configuration files.
//!
//! One entry per line, `#` starts a comment, blank lines are ignored. Keys are
//! dotted names (`turbine.diameter_m`). Every key must be consumed by the
//! component reading the file; leftovers are reported by [`KvConfig::finish`].

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug, Clone, Default)]
pub struct KvConfig {
    origin: PathBuf,
    entries: BTreeMap<String, Entry>,
    consumed: BTreeSet<String>,
}

impl KvConfig {
    pub fn new() -> Self {
        Self { origin: PathBuf::from("<flags>"), ..Self::default() }
    }

    pub fn parse_str(text: &str, origin: impl Into<PathBuf>) -> Result<Self> {
        let origin = origin.into();
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(Error::parse(&origin, line, format!("expected `key = value`, got `{content}`")));
            };
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(Error::parse(&origin, line, format!("invalid key `{key}`")));
            }
            let entry = Entry { value: value.trim().to_string(), line };
            if entries.insert(key.to_string(), entry).is_some() {
                return Err(Error::parse(&origin, line, format!("duplicate key `{key}`")));
            }
        }
        Ok(Self { origin, entries, consumed: BTreeSet::new() })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
        Self::parse_str(&text, path)
    }

    /// Inserts or overrides an entry, e.g. from a command-line flag.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), Entry { value: value.to_string(), line: 0 });
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get<T>(&mut self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        let Some(entry) = self.entries.get(key) else {
            return Ok(None);
        };
        self.consumed.insert(key.to_string());
        entry
            .value
            .parse::<T>()
            .map(Some)
            .map_err(|e| Error::parse(&self.origin, entry.line, format!("`{key}`: {e}")))
    }

    pub fn get_or<T>(&mut self, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Comma-separated list value.
    pub fn get_list<T>(&mut self, key: &str) -> Result<Option<Vec<T>>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        let Some(entry) = self.entries.get(key) else {
            return Ok(None);
        };
        self.consumed.insert(key.to_string());
        entry
            .value
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<T>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(Some)
            .map_err(|e| Error::parse(&self.origin, entry.line, format!("`{key}`: {e}")))
    }

    /// Rejects any key that no reader asked for.
    pub fn finish(&self) -> Result<()> {
        let unknown: Vec<_> = self
            .entries
            .iter()
            .filter(|(k, _)| !self.consumed.contains(*k))
            .collect();
        match unknown.first() {
            None => Ok(()),
            Some((key, entry)) => {
                let names: Vec<&str> = unknown.iter().map(|(k, _)| k.as_str()).collect();
                Err(Error::parse(
                    &self.origin,
                    entry.line,
                    format!("unknown key `{key}` (unknown keys: {})", names.join(", ")),
                ))
            }
        }
    }

    /// Sorted `key = value` lines, independent of file layout and comments.
    pub fn canonical_text(&self) -> String {
        self.entries.iter().map(|(k, e)| format!("{k} = {}\n", e.value)).collect()
    }

    pub fn hash(&self) -> String {
        config_hash(&self.canonical_text())
    }
}

/// First 16 hex digits of the SHA-256 of `text`.
pub fn config_hash(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    hex::encode(&digest[..8])
}
