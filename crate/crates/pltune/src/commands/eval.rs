//! `eval map50` and `eval pl-quality`.

use std::path::PathBuf;

use anyhow::{Context, Result};

use pltune_core::harness::{evaluate_pseudo_quality, map_50, AP_IOU_THRESHOLD};

use crate::formats::coco::{load_dataset, load_detections};
use crate::formats::metrics::{MapDocument, QualityDocument};
use crate::formats::pseudo::load_pseudo;
use crate::output::{OutputDir, RunRecord};

pub struct EvalOptions {
    pub gt: PathBuf,
    pub pred: PathBuf,
    pub output_dir: PathBuf,
}

pub fn run_map50(o: &EvalOptions) -> Result<()> {
    let truth = load_dataset(&o.gt)?;
    let dets = load_detections(&o.pred)?;
    let report = map_50(&dets, &truth).with_context(|| o.pred.display().to_string())?;
    let mut out = OutputDir::create(&o.output_dir)?;
    out.write_json("map50.json", &MapDocument::new(AP_IOU_THRESHOLD, &report))?;
    let mut rec = RunRecord::default();
    rec.input(&o.gt);
    rec.input(&o.pred);
    out.finish("eval-map50", rec)
}

pub fn run_pl_quality(o: &EvalOptions) -> Result<()> {
    let truth = load_dataset(&o.gt)?;
    let set = load_pseudo(&o.pred)?;
    let q = evaluate_pseudo_quality(&set, &truth).with_context(|| o.pred.display().to_string())?;
    for c in &q.excluded {
        eprintln!(
            "warning: class {c} is not annotated in {}; left out",
            o.gt.display()
        );
    }
    let mut out = OutputDir::create(&o.output_dir)?;
    out.write_json("pl_quality.json", &QualityDocument::from(&q))?;
    let mut rec = RunRecord::default();
    rec.input(&o.gt);
    rec.input(&o.pred);
    out.finish("eval-pl-quality", rec)
}
