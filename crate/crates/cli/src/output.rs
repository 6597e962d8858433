use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::config::Common;

/// Output directory that refuses to clobber files without `--force`.
pub struct OutputDir {
    dir: PathBuf,
}

impl OutputDir {
    /// Creates the directory and checks up front that none of `files` exists
    /// (unless forced), so a refused run writes nothing.
    pub fn prepare(common: &Common, files: &[&str]) -> Result<Self> {
        let dir = common.out_dir()?.to_path_buf();
        if !common.force {
            if let Some(f) = files.iter().find(|f| dir.join(f).exists()) {
                bail!(
                    "{} already exists (use --force to overwrite)",
                    dir.join(f).display()
                );
            }
        }
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<()> {
        let p = self.path(name);
        fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn write_csv<I, R>(&self, name: &str, header: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator,
        R::Item: AsRef<[u8]>,
    {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))?;
        self.write(name, &bytes)
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Manifest echoing the command, its effective configuration and digests of
/// every input file.
pub fn manifest(
    command: &str,
    config: Map<String, Value>,
    inputs: &[&Path],
    extra: Value,
) -> Result<Value> {
    let mut digests = Map::new();
    for p in inputs {
        digests.insert(p.display().to_string(), Value::String(sha256_file(p)?));
    }
    Ok(json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config": config,
        "inputs_sha256": digests,
        "details": extra,
    }))
}
