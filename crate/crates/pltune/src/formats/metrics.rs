//! Metric documents written by `eval`.

use serde::{Deserialize, Serialize};

use pltune_core::harness::{MapReport, PseudoQuality};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAp {
    pub class_id: u32,
    pub ap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapDocument {
    pub iou_threshold: f64,
    /// Over classes with at least one ground-truth object.
    pub mean_ap: f64,
    pub per_class: Vec<ClassAp>,
}

impl MapDocument {
    pub fn new(iou_threshold: f64, report: &MapReport) -> Self {
        Self {
            iou_threshold,
            mean_ap: report.mean,
            per_class: report
                .per_class
                .iter()
                .map(|(c, ap)| ClassAp {
                    class_id: c.0,
                    ap: *ap,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityDocument {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: u64,
    pub fp: u64,
    pub n_gt: u64,
    pub excluded_classes: Vec<u32>,
}

impl From<&PseudoQuality> for QualityDocument {
    fn from(q: &PseudoQuality) -> Self {
        Self {
            precision: q.precision(),
            recall: q.recall(),
            f1: q.f1(),
            tp: q.tp,
            fp: q.fp,
            n_gt: q.n_gt,
            excluded_classes: q.excluded.iter().map(|c| c.0).collect(),
        }
    }
}
