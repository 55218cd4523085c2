//! `grid-search`: uniform thresholds scored by an evaluator, candidates
//! spread over the worker pool and reported in pool order.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use pltune_core::harness::{
    evaluate_candidate, GridFailure, GridReport, PseudoLabelRun, PseudoQualityEvaluator,
};
use pltune_core::pseudo::GenerateOptions;

use super::thread_pool;
use crate::config::LoadedConfig;
use crate::formats::bundle::load_bundle;
use crate::formats::coco::load_detections;
use crate::formats::grid::{grid_tsv, GridDocument};
use crate::output::{OutputDir, RunRecord};

pub struct GridOptions {
    pub config: PathBuf,
    pub output_dir: Option<PathBuf>,
    pub jobs: usize,
}

pub fn run(o: &GridOptions) -> Result<()> {
    let cfg = LoadedConfig::load(&o.config)?;
    let grid = &cfg.config.grid;
    let spec = grid
        .spec()
        .with_context(|| cfg.path.display().to_string())?;
    let mut rec = RunRecord {
        seed: Some(cfg.config.seed),
        config: Some((cfg.path.clone(), cfg.bytes.clone())),
        ..Default::default()
    };
    rec.arg("evaluator", grid.evaluator.as_str());

    let bundle_path = cfg.bundle_path()?;
    let loaded = load_bundle(&bundle_path)?;
    for f in &loaded.files {
        rec.input(f);
    }
    let Some(full_truth) = loaded.full_truth else {
        bail!(
            "{}: full_truth: the pseudo_quality evaluator needs complete annotations",
            bundle_path.display()
        );
    };
    let det_paths = cfg.detection_paths();
    if det_paths.len() != loaded.bundle.datasets.len() {
        bail!(
            "{}: inputs.detections: {} files for {} datasets",
            cfg.path.display(),
            det_paths.len(),
            loaded.bundle.datasets.len()
        );
    }
    let detections = det_paths
        .iter()
        .map(|p| load_detections(p))
        .collect::<Result<Vec<_>>>()?;
    for p in &det_paths {
        rec.input(p);
    }

    let evaluator = PseudoQualityEvaluator::new(&loaded.bundle, full_truth)?;
    let run = PseudoLabelRun {
        bundle: &loaded.bundle,
        detections: &detections,
        options: GenerateOptions {
            detector: cfg.config.method.detector.clone(),
            emit_background: cfg.config.method.emit_background,
        },
    };
    let candidates = spec.candidates();
    let scores: Vec<_> = thread_pool(o.jobs)?.install(|| {
        candidates
            .par_iter()
            .map(|&c| evaluate_candidate(&run, c, &evaluator))
            .collect()
    });
    let mut table = Vec::with_capacity(candidates.len());
    for (c, s) in candidates.iter().zip(scores) {
        match s {
            Ok(score) => table.push((*c, score)),
            Err(GridFailure::Pipeline(e) | GridFailure::Evaluator(e)) => {
                return Err(anyhow::Error::new(e).context(format!(
                    "candidate {c:?} failed after {} scored candidates",
                    table.len()
                )));
            }
        }
    }
    let report = GridReport::from_table(table, &loaded.bundle.full_class_set)?;

    let out_dir = cfg.output_dir(o.output_dir.as_deref());
    let mut out = OutputDir::create(&out_dir)?;
    out.write_json(
        "grid.json",
        &GridDocument::new(grid.evaluator.as_str(), &report),
    )?;
    out.write("grid.tsv", grid_tsv(&report).as_bytes())?;
    out.finish("grid-search", rec)
}
