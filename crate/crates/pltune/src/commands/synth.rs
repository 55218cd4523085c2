//! `synth world`, `synth partition` and `synth detect`.

use std::path::PathBuf;

use anyhow::{bail, Result};
use rayon::prelude::*;

use pltune_core::synth::{generate_world, partition_classes, simulate_detector, WorldConfig};

use super::thread_pool;
use crate::config::{seeds, LoadedConfig};
use crate::formats::bundle::{load_bundle, BundleDocument};
use crate::formats::coco::{detections_to, load_dataset, CocoDocument};
use crate::output::{OutputDir, RunRecord};

pub struct SynthOptions {
    pub config: PathBuf,
    /// `partition`: an existing world instead of generating one.
    pub world: Option<PathBuf>,
    /// `detect`: overrides `inputs.bundle`.
    pub bundle: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub jobs: usize,
}

fn record(cfg: &LoadedConfig) -> RunRecord {
    RunRecord {
        seed: Some(cfg.config.seed),
        config: Some((cfg.path.clone(), cfg.bytes.clone())),
        ..Default::default()
    }
}

pub fn run_world(o: &SynthOptions) -> Result<()> {
    let cfg = LoadedConfig::load(&o.config)?;
    let world = generate_world(&cfg.world_config()?)?;
    let mut out = OutputDir::create(&cfg.output_dir(o.output_dir.as_deref()))?;
    out.write_json("world.json", &CocoDocument::from_dataset(&world))?;
    out.finish("synth-world", record(&cfg))
}

pub fn run_partition(o: &SynthOptions) -> Result<()> {
    let cfg = LoadedConfig::load(&o.config)?;
    let mut rec = record(&cfg);
    let world = match &o.world {
        Some(p) => {
            rec.input(p);
            load_dataset(p)?
        }
        None => generate_world(&cfg.world_config()?)?,
    };
    let n_splits = cfg.n_splits();
    rec.arg("n_splits", n_splits);
    let part = partition_classes(&world, n_splits, cfg.seed(seeds::PARTITION))?;

    let mut out = OutputDir::create(&cfg.output_dir(o.output_dir.as_deref()))?;
    let (mut datasets, mut truths) = (Vec::new(), Vec::new());
    for (i, (ds, truth)) in part
        .bundle
        .datasets
        .iter()
        .zip(&part.full_truth)
        .enumerate()
    {
        let (name, truth_name) = (format!("dataset_{i}.json"), format!("full_truth_{i}.json"));
        out.write_json(&name, &CocoDocument::from_dataset(ds))?;
        out.write_json(&truth_name, &CocoDocument::from_dataset(truth))?;
        datasets.push(name);
        truths.push(truth_name);
    }
    let doc = BundleDocument {
        datasets,
        full_truth: Some(truths),
    };
    out.write_json("bundle.json", &doc)?;
    out.finish("synth-partition", rec)
}

pub fn run_detect(o: &SynthOptions) -> Result<()> {
    let cfg = LoadedConfig::load(&o.config)?;
    let mut rec = record(&cfg);
    let bundle_path = match &o.bundle {
        Some(p) => p.clone(),
        None => cfg.bundle_path()?,
    };
    let loaded = load_bundle(&bundle_path)?;
    for f in &loaded.files {
        rec.input(f);
    }
    let Some(full_truth) = &loaded.full_truth else {
        bail!(
            "{}: full_truth: needed to simulate teachers",
            bundle_path.display()
        );
    };
    let profile = cfg.detector_profile()?;
    let val_config = WorldConfig {
        n_images: cfg.validation_images(),
        seed: cfg.seed(seeds::VALIDATION_WORLD),
        ..cfg.world_config()?
    };

    let bundle = &loaded.bundle;
    let (per_dataset, validation) = thread_pool(o.jobs)?.install(|| {
        let per_dataset: Vec<_> = (0..bundle.datasets.len())
            .into_par_iter()
            .map(|i| {
                let missing = bundle.complement(i)?;
                simulate_detector(
                    &full_truth[i],
                    &missing,
                    &profile,
                    cfg.seed(seeds::DETECTIONS + i as u64),
                )
            })
            .collect();
        let validation = generate_world(&val_config).and_then(|world| {
            let dets = simulate_detector(
                &world,
                &world.class_set(),
                &profile,
                cfg.seed(seeds::VALIDATION_DETECTIONS),
            )?;
            Ok((world, dets))
        });
        (per_dataset, validation)
    });

    let mut out = OutputDir::create(&cfg.output_dir(o.output_dir.as_deref()))?;
    for (i, dets) in per_dataset.into_iter().enumerate() {
        out.write_json(&format!("detections_{i}.json"), &detections_to(&dets?))?;
    }
    let (val_world, val_dets) = validation?;
    out.write_json(
        "validation_gt.json",
        &CocoDocument::from_dataset(&val_world),
    )?;
    out.write_json("validation_detections.json", &detections_to(&val_dets))?;
    out.finish("synth-detect", rec)
}
