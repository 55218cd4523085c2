//! Match-record files: per-class TP/FP tags produced by `match`.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use pltune_core::matching::{ClassMatches, MatchRecord};
use pltune_core::{ClassId, ImageId};

use super::read_json;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordEntry {
    pub image_id: u64,
    pub score: f64,
    pub matched_gt: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRecords {
    pub class_id: u32,
    pub n_gt: u64,
    pub records: Vec<RecordEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchDocument {
    pub iou_threshold: f64,
    pub classes: Vec<ClassRecords>,
}

impl MatchDocument {
    pub fn new(iou_threshold: f64, matches: &BTreeMap<ClassId, ClassMatches>) -> Self {
        let classes = matches
            .values()
            .map(|m| ClassRecords {
                class_id: m.class_id.0,
                n_gt: m.n_gt,
                records: m
                    .records
                    .iter()
                    .map(|r| RecordEntry {
                        image_id: r.image_id.0,
                        score: r.score,
                        matched_gt: r.matched_gt,
                    })
                    .collect(),
            })
            .collect();
        Self {
            iou_threshold,
            classes,
        }
    }

    pub fn to_matches(&self) -> Result<BTreeMap<ClassId, ClassMatches>> {
        let mut out = BTreeMap::new();
        for (i, c) in self.classes.iter().enumerate() {
            let class_id = ClassId(c.class_id);
            let records: Vec<MatchRecord> = c
                .records
                .iter()
                .map(|r| MatchRecord {
                    class_id,
                    image_id: ImageId(r.image_id),
                    score: r.score,
                    matched_gt: r.matched_gt,
                })
                .collect();
            if let Some(j) = records.iter().position(|r| !(0.0..=1.0).contains(&r.score)) {
                bail!("classes[{i}].records[{j}].score: outside [0, 1]");
            }
            let m = ClassMatches {
                class_id,
                records,
                n_gt: c.n_gt,
            };
            if out.insert(class_id, m).is_some() {
                bail!("classes[{i}].class_id: class {} listed twice", c.class_id);
            }
        }
        Ok(out)
    }
}

pub fn load_matches(path: &Path) -> Result<(f64, BTreeMap<ClassId, ClassMatches>)> {
    let doc: MatchDocument = read_json(path)?;
    let m = doc
        .to_matches()
        .with_context(|| path.display().to_string())?;
    Ok((doc.iou_threshold, m))
}
