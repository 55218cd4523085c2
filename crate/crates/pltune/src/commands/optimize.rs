//! `optimize`: per-class thresholds from validation curves.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Result};

use pltune_core::combined::{estimate_label_ratios, select_policy_ds, select_policy_ds_global};
use pltune_core::model::LabelRatioTable;
use pltune_core::threshold::{select_policy, select_policy_global, Selection};

use super::{curves_of, match_parallel, pool_matches, thread_pool};
use crate::config::{LoadedConfig, Mode, Scope};
use crate::formats::bundle::load_bundle;
use crate::formats::coco::{load_dataset, load_detections};
use crate::formats::curve::curves_tsv;
use crate::formats::policy::{policy_tsv, PolicyDocument};
use crate::formats::ratios::{load_ratios, to_document};
use crate::output::{OutputDir, RunRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SelectMethod {
    FmaxPl,
    FmaxDs,
}

impl SelectMethod {
    fn name(self) -> &'static str {
        match self {
            SelectMethod::FmaxPl => "fmax-pl",
            SelectMethod::FmaxDs => "fmax-ds",
        }
    }
}

pub struct OptimizeOptions {
    pub config: PathBuf,
    pub method: SelectMethod,
    pub mode: Option<Mode>,
    pub output_dir: Option<PathBuf>,
    pub jobs: usize,
}

pub fn run(o: &OptimizeOptions) -> Result<()> {
    let cfg = LoadedConfig::load(&o.config)?;
    let m = &cfg.config.method;
    let mode = o.mode.or(m.mode).unwrap_or(Mode::Single);
    let betas = m.betas(mode)?;
    let mut rec = RunRecord {
        seed: Some(cfg.config.seed),
        config: Some((cfg.path.clone(), cfg.bytes.clone())),
        ..Default::default()
    };
    rec.arg("method", o.method.name());
    rec.arg("mode", format!("{mode:?}").to_lowercase());
    rec.arg("iou_threshold", m.iou_threshold);

    let pairs = &cfg.config.inputs.validation;
    if pairs.is_empty() {
        bail!(
            "{}: inputs.validation: at least one gt/detections pair is required",
            cfg.path.display()
        );
    }
    let pool = thread_pool(o.jobs)?;
    let mut sets = Vec::new();
    for pair in pairs {
        let (gt, det) = (cfg.resolve(&pair.gt), cfg.resolve(&pair.detections));
        let truth = load_dataset(&gt)?;
        let dets = load_detections(&det)?;
        sets.push(pool.install(|| match_parallel(&dets, &truth, m.iou_threshold))?);
        rec.input(&gt);
        rec.input(&det);
    }
    let curves = curves_of(&pool_matches(sets), &cfg.path)?;

    let mut ratios_used: Option<LabelRatioTable> = None;
    let selection: Selection = match o.method {
        SelectMethod::FmaxPl => match m.scope {
            Scope::PerClass => select_policy(&curves, betas)?,
            Scope::Global => select_policy_global(&curves, betas)?,
        },
        SelectMethod::FmaxDs => {
            let ratios = match &m.ratios {
                Some(r) => {
                    let p = cfg.resolve(r);
                    rec.input(&p);
                    load_ratios(&p)?
                }
                None => {
                    let bundle_path = cfg.bundle_path()?;
                    let loaded = load_bundle(&bundle_path)?;
                    for f in &loaded.files {
                        rec.input(f);
                    }
                    estimate_label_ratios(&loaded.bundle)?
                }
            };
            let sel = match m.scope {
                Scope::PerClass => select_policy_ds(&curves, &ratios, betas)?,
                Scope::Global => select_policy_ds_global(&curves, &ratios, betas)?,
            };
            ratios_used = Some(ratios);
            sel
        }
    };
    rec.arg("scope", format!("{:?}", m.scope).to_lowercase());
    for c in &selection.empty_curves {
        eprintln!("warning: class {c} has no validation detections; threshold set to 1");
    }

    let out_dir = cfg.output_dir(o.output_dir.as_deref());
    let mut out = OutputDir::create(&out_dir)?;
    out.write_json(
        "policy.json",
        &PolicyDocument::from_policy(&selection.policy),
    )?;
    out.write("policy.tsv", policy_tsv(&selection.policy).as_bytes())?;
    out.write("curves.tsv", curves_tsv(&curves).as_bytes())?;
    if let Some(r) = &ratios_used {
        let used: LabelRatioTable = r
            .iter()
            .filter(|(c, _)| curves.contains_key(c))
            .map(|(c, v)| (*c, *v))
            .collect::<BTreeMap<_, _>>();
        out.write_json("ratios.json", &to_document(&used))?;
    }
    out.finish("optimize", rec)
}
