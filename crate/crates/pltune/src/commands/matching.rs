//! `match` and `pr-curve`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{Context, Result};

use pltune_core::combined::combined_curve;
use pltune_core::model::LabelRatio;

use super::{curves_of, match_parallel, thread_pool};
use crate::formats::coco::{load_dataset, load_detections};
use crate::formats::curve::{combined_tsv, curves_svg, curves_tsv};
use crate::formats::ratios::load_ratios;
use crate::formats::records::{load_matches, MatchDocument};
use crate::output::{OutputDir, RunRecord};

pub struct MatchOptions {
    pub gt: PathBuf,
    pub det: PathBuf,
    pub iou: f64,
    pub output_dir: PathBuf,
    pub jobs: usize,
}

pub fn run_match(o: &MatchOptions) -> Result<()> {
    let truth = load_dataset(&o.gt)?;
    let dets = load_detections(&o.det)?;
    let matches = thread_pool(o.jobs)?.install(|| match_parallel(&dets, &truth, o.iou))?;

    let mut out = OutputDir::create(&o.output_dir)?;
    out.write_json("matches.json", &MatchDocument::new(o.iou, &matches))?;
    let mut rec = RunRecord::default();
    rec.arg("iou", o.iou);
    rec.input(&o.gt);
    rec.input(&o.det);
    out.finish("match", rec)
}

pub struct CurveOptions {
    pub records: PathBuf,
    pub ratios: Option<PathBuf>,
    pub svg: bool,
    pub output_dir: PathBuf,
}

pub fn run_pr_curve(o: &CurveOptions) -> Result<()> {
    let (_, matches) = load_matches(&o.records)?;
    let curves = curves_of(&matches, &o.records)?;
    let mut out = OutputDir::create(&o.output_dir)?;
    let mut rec = RunRecord::default();
    rec.input(&o.records);

    let series: BTreeMap<_, Vec<(f64, f64)>> = match &o.ratios {
        None => {
            out.write("curves.tsv", curves_tsv(&curves).as_bytes())?;
            curves
                .iter()
                .map(|(c, k)| {
                    (
                        *c,
                        k.points().iter().map(|p| (p.precision, p.recall)).collect(),
                    )
                })
                .collect()
        }
        Some(path) => {
            rec.input(path);
            rec.arg("combined", true);
            let ratios = load_ratios(path)?;
            let mut combined = BTreeMap::new();
            for (c, curve) in &curves {
                let x = ratios
                    .get(c)
                    .map(LabelRatio::x)
                    .with_context(|| format!("{}: no ratio for class {c}", path.display()))?;
                combined.insert(*c, (x, combined_curve(curve, x)?));
            }
            out.write("combined_curves.tsv", combined_tsv(&combined).as_bytes())?;
            combined
                .iter()
                .map(|(c, (_, pts))| (*c, pts.iter().map(|p| (p.p_ds, p.r_ds)).collect()))
                .collect()
        }
    };
    if o.svg {
        out.write("curves.svg", curves_svg(&series).as_bytes())?;
    }
    out.finish("pr-curve", rec)
}
