//! Atomic output files confined to one directory, plus the run manifest.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Component, Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::formats::json_bytes;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn is_plain_name(name: &str) -> bool {
    let mut parts = Path::new(name).components();
    matches!(
        (parts.next(), parts.next()),
        (Some(Component::Normal(_)), None)
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub arguments: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub config: Option<FileDigest>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

/// Describes one invocation; filled in by the command, written by
/// [`OutputDir::finish`].
#[derive(Debug, Clone, Default)]
pub struct RunRecord {
    pub arguments: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub config: Option<(PathBuf, Vec<u8>)>,
    pub inputs: Vec<PathBuf>,
}

impl RunRecord {
    pub fn arg(&mut self, name: &str, value: impl ToString) {
        self.arguments.insert(name.to_string(), value.to_string());
    }

    pub fn input(&mut self, path: &Path) {
        if !self.inputs.iter().any(|p| p == path) {
            self.inputs.push(path.to_path_buf());
        }
    }
}

/// Every write goes to a temporary file in the directory and is renamed into
/// place; names with path separators are refused.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<FileDigest>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root)
            .with_context(|| format!("cannot create output directory {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        if !is_plain_name(name) {
            bail!("refusing to write {name:?} outside the output directory");
        }
        let target = self.root.join(name);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.root).with_context(|| {
            format!("cannot create a temporary file in {}", self.root.display())
        })?;
        tmp.write_all(bytes)
            .and_then(|_| tmp.as_file().sync_all())
            .with_context(|| format!("cannot write {}", target.display()))?;
        tmp.persist(&target)
            .with_context(|| format!("cannot write {}", target.display()))?;
        self.written.retain(|f| f.path != name);
        self.written.push(FileDigest {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        self.write(name, &json_bytes(value)?)
    }

    /// Writes `<command>.manifest.json` listing inputs and outputs.
    pub fn finish(mut self, command: &str, record: RunRecord) -> Result<()> {
        let digest = |p: &Path| -> Result<FileDigest> {
            let bytes = std::fs::read(p).with_context(|| format!("cannot read {}", p.display()))?;
            Ok(FileDigest {
                path: p.display().to_string(),
                sha256: sha256_hex(&bytes),
            })
        };
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            arguments: record.arguments,
            seed: record.seed,
            config: record.config.map(|(p, bytes)| FileDigest {
                path: p.display().to_string(),
                sha256: sha256_hex(&bytes),
            }),
            inputs: record
                .inputs
                .iter()
                .map(|p| digest(p))
                .collect::<Result<_>>()?,
            outputs: self.written.clone(),
        };
        let name = format!("{}.manifest.json", command.replace(' ', "-"));
        self.write_json(&name, &manifest)
    }
}
