//! `pseudo-label` and `merge`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};

use pltune_core::pseudo::{generate, merge_bundle, GenerateOptions};

use crate::formats::bundle::load_bundle;
use crate::formats::coco::{load_dataset, load_detections, CocoDocument};
use crate::formats::policy::load_policy;
use crate::formats::pseudo::{load_pseudo, PseudoDocument};
use crate::output::{OutputDir, RunRecord};

pub struct PseudoLabelOptions {
    pub policy: PathBuf,
    pub det: PathBuf,
    pub target_gt: PathBuf,
    pub detector: String,
    pub emit_background: bool,
    pub output_dir: PathBuf,
}

pub fn run_pseudo_label(o: &PseudoLabelOptions) -> Result<()> {
    let policy = load_policy(&o.policy)?;
    let dets = load_detections(&o.det)?;
    let target = load_dataset(&o.target_gt)?;
    let opts = GenerateOptions {
        detector: o.detector.clone(),
        emit_background: o.emit_background,
    };
    let set = generate(&dets, &policy, &target, &opts).with_context(|| {
        format!(
            "{} against {} with {}",
            o.det.display(),
            o.target_gt.display(),
            o.policy.display()
        )
    })?;

    let mut out = OutputDir::create(&o.output_dir)?;
    out.write_json("pseudo.json", &PseudoDocument::from_set(&set))?;
    let mut rec = RunRecord::default();
    rec.arg("detector", &o.detector);
    rec.arg("emit_background", o.emit_background);
    for p in [&o.policy, &o.det, &o.target_gt] {
        rec.input(p);
    }
    out.finish("pseudo-label", rec)
}

pub struct MergeOptions {
    pub bundle: PathBuf,
    /// `PATH` (bundle order) or `INDEX=PATH`.
    pub pseudo: Vec<String>,
    pub output_dir: PathBuf,
}

/// Splits `INDEX=PATH`; anything else is a path for the next position.
fn parse_pseudo_arg(arg: &str, position: usize) -> (usize, PathBuf) {
    if let Some((i, p)) = arg.split_once('=') {
        if let Ok(i) = i.parse() {
            return (i, PathBuf::from(p));
        }
    }
    (position, PathBuf::from(arg))
}

pub fn run_merge(o: &MergeOptions) -> Result<()> {
    let loaded = load_bundle(&o.bundle)?;
    let mut rec = RunRecord::default();
    for f in &loaded.files {
        rec.input(f);
    }
    let mut sets = BTreeMap::new();
    for (pos, arg) in o.pseudo.iter().enumerate() {
        let (i, path) = parse_pseudo_arg(arg, pos);
        if i >= loaded.bundle.datasets.len() {
            bail!(
                "--pseudo {arg}: the bundle has {} datasets",
                loaded.bundle.datasets.len()
            );
        }
        let set = load_pseudo(&path)?;
        if sets.insert(i, set).is_some() {
            bail!("--pseudo {arg}: dataset {i} given twice");
        }
        rec.input(&path);
    }
    let merged =
        merge_bundle(&loaded.bundle, &sets).with_context(|| o.bundle.display().to_string())?;

    let mut out = OutputDir::create(&o.output_dir)?;
    out.write_json("merged.json", &CocoDocument::from_dataset(&merged))?;
    out.finish("merge", rec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pseudo_args() {
        assert_eq!(parse_pseudo_arg("a.json", 3), (3, PathBuf::from("a.json")));
        assert_eq!(
            parse_pseudo_arg("1=a.json", 0),
            (1, PathBuf::from("a.json"))
        );
        assert_eq!(
            parse_pseudo_arg("x=a.json", 2),
            (2, PathBuf::from("x=a.json"))
        );
    }
}
