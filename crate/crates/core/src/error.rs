use alloc::string::String;

use crate::model::{ClassId, ImageId};

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid box (x={x}, y={y}, w={w}, h={h}): width and height must be positive and all coordinates finite")]
    InvalidBox { x: f64, y: f64, w: f64, h: f64 },

    #[error("score {0} is outside [0, 1]")]
    ScoreOutOfRange(f64),

    #[error("{name} = {value} is outside [0, 1]")]
    OutOfUnitInterval { name: &'static str, value: f64 },

    #[error("annotation {annotation} references unknown image {image}")]
    UnknownImage { image: ImageId, annotation: u64 },

    #[error("annotation {annotation} has class {class} which is not in the dataset's class set")]
    UnknownClass { class: ClassId, annotation: u64 },

    #[error("duplicate image id {0}")]
    DuplicateImage(ImageId),

    #[error("expected records of class {expected} only, found class {found}")]
    MixedClasses { expected: ClassId, found: ClassId },

    #[error("IoU threshold {0} must lie in (0, 1]")]
    InvalidIouThreshold(f64),

    #[error("beta must be positive and finite, got {0}")]
    InvalidBeta(f64),

    #[error("class {class}: {tp} true positives exceed {n_gt} ground-truth objects")]
    TruePositivesExceedGroundTruth { class: ClassId, tp: u64, n_gt: u64 },

    #[error("precision is 0 while recall is {0} > 0")]
    ZeroPrecisionWithRecall(f64),

    #[error("no label ratio for class {0}")]
    MissingRatio(ClassId),

    #[error("no threshold for class {0}")]
    MissingThreshold(ClassId),

    #[error("class {0} is not part of the bundle's class set")]
    ClassNotInBundle(ClassId),

    #[error(
        "class {class} is already annotated by the target dataset; it cannot receive pseudo labels"
    )]
    ClassAlreadyAnnotated { class: ClassId },

    #[error("tau_h = {tau_h} is below tau_l = {tau_l}")]
    InvertedThresholds { tau_h: f64, tau_l: f64 },

    #[error("bundle contains no images")]
    EmptyBundle,

    #[error("dataset index {0} is out of range")]
    UnknownDataset(usize),

    #[error("id {0} does not fit the merged id namespace")]
    IdOutOfNamespace(u64),

    #[error("cannot split {n_classes} classes into {n_splits} datasets")]
    TooManySplits { n_splits: usize, n_classes: usize },

    #[error("grid has no candidates")]
    EmptyGrid,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
