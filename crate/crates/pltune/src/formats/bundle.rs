//! Bundle manifests: member dataset files, listed relative to the manifest.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use pltune_core::model::{validate_bundle, Severity};
use pltune_core::{Dataset, DatasetBundle};

use super::coco::load_dataset;
use super::read_json;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleDocument {
    pub datasets: Vec<String>,
    /// Complete annotations of each member's images, for oracle evaluation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_truth: Option<Vec<String>>,
}

pub struct LoadedBundle {
    pub bundle: DatasetBundle,
    pub full_truth: Option<Vec<Dataset>>,
    /// Every file read, manifest first.
    pub files: Vec<PathBuf>,
}

fn resolve(base: &Path, rel: &str) -> PathBuf {
    base.parent().unwrap_or(Path::new("")).join(rel)
}

/// Loads a bundle manifest and its members; error-level findings of the
/// bundle check are fatal.
pub fn load_bundle(path: &Path) -> Result<LoadedBundle> {
    let doc: BundleDocument = read_json(path)?;
    if doc.datasets.is_empty() {
        bail!("{}: datasets: empty bundle", path.display());
    }
    let mut files = vec![path.to_path_buf()];
    let mut datasets = Vec::new();
    for (i, rel) in doc.datasets.iter().enumerate() {
        let p = resolve(path, rel);
        datasets
            .push(load_dataset(&p).with_context(|| format!("{}: datasets[{i}]", path.display()))?);
        files.push(p);
    }
    let full_truth = match &doc.full_truth {
        None => None,
        Some(list) => {
            if list.len() != datasets.len() {
                bail!(
                    "{}: full_truth: {} entries for {} datasets",
                    path.display(),
                    list.len(),
                    datasets.len()
                );
            }
            let mut out = Vec::new();
            for (i, rel) in list.iter().enumerate() {
                let p = resolve(path, rel);
                out.push(
                    load_dataset(&p)
                        .with_context(|| format!("{}: full_truth[{i}]", path.display()))?,
                );
                files.push(p);
            }
            Some(out)
        }
    };
    let bundle = DatasetBundle::from_datasets(datasets);
    for finding in validate_bundle(&bundle) {
        if finding.severity() == Severity::Error {
            bail!("{}: {finding}", path.display());
        }
        eprintln!("warning: {}: {finding}", path.display());
    }
    Ok(LoadedBundle {
        bundle,
        full_truth,
        files,
    })
}
