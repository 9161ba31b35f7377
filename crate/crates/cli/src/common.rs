use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use tidal_core::config::KvConfig;

pub const TOOL_VERSION: &str = concat!("tidal ", env!("CARGO_PKG_VERSION"));

/// Bad flags or inputs detected by the CLI itself (exit code 2).
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

/// The triple every output file carries.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn from_config(cfg: &KvConfig, seed: Option<u64>) -> Self {
        Self { config_hash: cfg.hash(), seed }
    }

    /// `# key: value` header lines for CSV outputs.
    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        vec![
            ("config_hash", self.config_hash.clone()),
            ("seed", self.seed.map_or_else(|| "none".to_string(), |s| s.to_string())),
            ("tool_version", TOOL_VERSION.to_string()),
        ]
    }
}

/// Reads the optional config file; flag overrides are applied by the caller with `set`.
pub fn load_config(path: Option<&Path>) -> Result<KvConfig> {
    Ok(match path {
        Some(p) => KvConfig::from_file(p)?,
        None => KvConfig::new(),
    })
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush().with_context(|| format!("writing {}", path.display()))
}

/// Adds the provenance triple to a JSON object.
pub fn with_provenance<T: Serialize>(value: &T, prov: &Provenance) -> Result<serde_json::Value> {
    let mut v = serde_json::to_value(value)?;
    if let Some(obj) = v.as_object_mut() {
        obj.insert("config_hash".into(), prov.config_hash.clone().into());
        obj.insert("seed".into(), prov.seed.into());
        obj.insert("tool_version".into(), TOOL_VERSION.into());
    }
    Ok(v)
}

/// File stem used as a default run label.
pub fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "run".to_string(), |s| s.to_string_lossy().into_owned())
}

/// Maps an error chain onto the documented exit codes.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    use tidal_core::Error as E;
    for cause in err.chain() {
        if cause.is::<Usage>() || cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::CheckpointVersion { .. } => 3,
                E::Divergence(_) => 1,
                _ => 2,
            };
        }
    }
    1
}
