//! Pseudo-label set files: provenance plus COCO-style annotations.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use pltune_core::pseudo::{Provenance, PseudoLabelSet};
use pltune_core::threshold::Method;
use pltune_core::ClassId;

use super::coco::{annotation_of, label_from, CocoAnnotation};
use super::policy::PolicyEntry;
use super::read_json;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoDocument {
    pub method: String,
    pub detector: String,
    pub thresholds: Vec<PolicyEntry>,
    pub annotations: Vec<CocoAnnotation>,
}

impl PseudoDocument {
    pub fn from_set(set: &PseudoLabelSet) -> Self {
        Self {
            method: set.provenance.method.as_str().to_string(),
            detector: set.provenance.detector.clone(),
            thresholds: set
                .provenance
                .thresholds
                .iter()
                .map(|(c, t)| PolicyEntry::new(*c, t))
                .collect(),
            annotations: set.labels.iter().map(annotation_of).collect(),
        }
    }

    pub fn to_set(&self) -> Result<PseudoLabelSet> {
        let method = Method::parse(&self.method)
            .with_context(|| format!("method: unknown method {:?}", self.method))?;
        let thresholds = self
            .thresholds
            .iter()
            .enumerate()
            .map(|(i, e)| {
                Ok((
                    ClassId(e.class_id),
                    e.thresholds().with_context(|| format!("thresholds[{i}]"))?,
                ))
            })
            .collect::<Result<_>>()?;
        let labels = self
            .annotations
            .iter()
            .enumerate()
            .map(|(i, a)| label_from(a).with_context(|| format!("annotations[{i}] (id {})", a.id)))
            .collect::<Result<Vec<_>>>()?;
        for (i, l) in labels.iter().enumerate() {
            if !(0.0..=1.0).contains(&l.score) {
                bail!("annotations[{i}].score: outside [0, 1]");
            }
        }
        Ok(PseudoLabelSet {
            labels,
            provenance: Provenance {
                method,
                thresholds,
                detector: self.detector.clone(),
            },
        })
    }
}

pub fn load_pseudo(path: &Path) -> Result<PseudoLabelSet> {
    let doc: PseudoDocument = read_json(path)?;
    doc.to_set().with_context(|| path.display().to_string())
}
