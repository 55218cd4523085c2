//! Pseudo-labeling threshold selection for object detectors trained on a
//! collection of datasets with disjoint class sets.
//!
//! Thresholds are chosen without retraining a student model: teacher
//! predictions on an annotated validation set give a precision/recall curve
//! per class, and the threshold maximizing an F-beta score of either the
//! pseudo labels alone ([`threshold`]) or of ground truth plus pseudo labels
//! ([`combined`]) is selected. [`pseudo`] materializes the labels,
//! [`harness`] holds the mAP50 metric and the grid-search baseline, and
//! [`synth`] builds synthetic worlds and teacher detectors.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod combined;
pub mod error;
pub mod harness;
pub mod matching;
pub mod model;
pub mod pseudo;
pub mod synth;
pub mod threshold;

pub use error::{Error, Result};
pub use model::{
    BBox, ClassId, Dataset, DatasetBundle, DetectionRecord, GroundTruthLabel, Image, ImageId,
    LabelSource,
};
