//! Subcommand implementations.

pub mod check;
pub mod eval;
pub mod grid;
pub mod matching;
pub mod optimize;
pub mod pseudo;
pub mod synth;

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use rayon::prelude::*;

use pltune_core::matching::{group_by_class, match_class, ClassMatches};
use pltune_core::threshold::{pr_curve, PrCurve};
use pltune_core::{ClassId, Dataset, DetectionRecord};

pub fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("cannot start worker threads")
}

/// Per-class matching, classes spread over the current rayon pool.
pub fn match_parallel(
    detections: &[DetectionRecord],
    truth: &Dataset,
    iou_threshold: f64,
) -> Result<BTreeMap<ClassId, ClassMatches>> {
    let (dets, gts) = group_by_class(detections, truth);
    let work: Vec<_> = dets.into_iter().zip(gts).collect();
    let results: Vec<_> = work
        .par_iter()
        .map(|((class, d), (_, g))| match_class(*class, d, g, iou_threshold).map(|m| (*class, m)))
        .collect();
    Ok(results.into_iter().collect::<Result<_, _>>()?)
}

/// Concatenates the records of classes seen in several match sets.
pub fn pool_matches(sets: Vec<BTreeMap<ClassId, ClassMatches>>) -> BTreeMap<ClassId, ClassMatches> {
    let mut out: BTreeMap<ClassId, ClassMatches> = BTreeMap::new();
    for set in sets {
        for (class, m) in set {
            match out.get_mut(&class) {
                None => {
                    out.insert(class, m);
                }
                Some(acc) => {
                    acc.records.extend(m.records);
                    acc.n_gt += m.n_gt;
                }
            }
        }
    }
    out
}

pub fn curves_of(
    matches: &BTreeMap<ClassId, ClassMatches>,
    source: &Path,
) -> Result<BTreeMap<ClassId, PrCurve>> {
    matches
        .iter()
        .map(|(c, m)| {
            let curve = pr_curve(*c, &m.records, m.n_gt)
                .with_context(|| format!("{}: class {c}", source.display()))?;
            Ok((*c, curve))
        })
        .collect()
}
