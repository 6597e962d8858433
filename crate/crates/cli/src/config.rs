//! Flag/config-file merging.
//!
//! Every subcommand's arguments double as a JSON config schema (kebab-case
//! keys, same names as the flags). Values given on the command line win over
//! the file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Options shared by every subcommand.
#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Common {
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Overwrite existing output files.
    #[arg(long)]
    #[serde(default)]
    pub force: bool,

    /// Worker threads; outputs do not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,

    /// JSON file supplying any of the flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl Common {
    pub fn out_dir(&self) -> Result<&Path> {
        self.out.as_deref().context("missing --out")
    }

    pub fn jobs(&self) -> Result<usize> {
        match self.jobs {
            Some(0) => bail!("--jobs must be at least 1"),
            Some(j) => Ok(j),
            None => Ok(1),
        }
    }
}

/// Subcommand arguments that carry a [`Common`] block.
pub trait HasCommon {
    fn common(&self) -> &Common;
}

/// Overlays the command-line values of `cli` on the config file named by
/// `--config`, if any.
pub fn merge<T>(cli: &T) -> Result<T>
where
    T: Serialize + DeserializeOwned + Default + HasCommon,
{
    let Some(path) = cli.common().config.clone() else {
        return Ok(serde_json::from_value(serde_json::to_value(cli)?)?);
    };
    let text = std::fs::read_to_string(&path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let file: Value = serde_json::from_str(&text)
        .with_context(|| format!("parsing config {}", path.display()))?;
    let Value::Object(mut merged) = file else {
        bail!("config {} must be a JSON object", path.display());
    };

    let known = known_keys(&T::default());
    if let Some(unknown) = merged.keys().find(|k| !known.contains(k)) {
        bail!("unknown key {unknown:?} in config {}", path.display());
    }
    if let Value::Object(flags) = serde_json::to_value(cli)? {
        for (k, v) in flags {
            if given(&v) {
                merged.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(merged))
        .with_context(|| format!("invalid value in config {}", path.display()))
}

/// Unset flags serialize as `null`, `false` or `[]`.
fn given(v: &Value) -> bool {
    match v {
        Value::Null | Value::Bool(false) => false,
        Value::Array(a) => !a.is_empty(),
        _ => true,
    }
}

fn known_keys<T: Serialize>(t: &T) -> Vec<String> {
    match serde_json::to_value(t) {
        Ok(Value::Object(m)) => m.keys().cloned().collect(),
        _ => Vec::new(),
    }
}

/// The merged configuration as echoed into manifests: everything except the
/// options that cannot change outputs.
pub fn manifest_config<T: Serialize>(t: &T) -> Result<Map<String, Value>> {
    let Value::Object(mut m) = serde_json::to_value(t)? else {
        bail!("configuration is not an object");
    };
    for k in ["out", "force", "jobs"] {
        m.remove(k);
    }
    m.retain(|_, v| !v.is_null());
    Ok(m)
}
