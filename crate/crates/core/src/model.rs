//! Domain types shared by every stage: boxes, labels, detections, datasets
//! and multi-dataset bundles.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ImageId(pub u64);

impl fmt::Display for ImageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassId(pub u32);

impl ClassId {
    /// Class id carried by explicit pseudo-background records.
    pub const BACKGROUND: ClassId = ClassId(u32::MAX);

    pub fn is_background(self) -> bool {
        self == Self::BACKGROUND
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Axis-aligned box in pixels, top-left origin, `(x, y, w, h)` like COCO.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        let finite = x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite();
        if !finite || w <= 0.0 || h <= 0.0 {
            return Err(Error::InvalidBox { x, y, w, h });
        }
        Ok(Self { x, y, w, h })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn to_xywh(&self) -> [f64; 4] {
        [self.x, self.y, self.w, self.h]
    }

    /// Same box with every coordinate multiplied by `factor` (> 0).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.x * factor,
            self.y * factor,
            self.w * factor,
            self.h * factor,
        )
    }
}

/// Where a training label came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum LabelSource {
    #[default]
    Human,
    Pseudo,
    PseudoBackground,
    Ignore,
}

impl LabelSource {
    pub fn as_str(self) -> &'static str {
        match self {
            LabelSource::Human => "human",
            LabelSource::Pseudo => "pseudo",
            LabelSource::PseudoBackground => "pseudo_background",
            LabelSource::Ignore => "ignore",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "human" => Some(LabelSource::Human),
            "pseudo" => Some(LabelSource::Pseudo),
            "pseudo_background" => Some(LabelSource::PseudoBackground),
            "ignore" => Some(LabelSource::Ignore),
            _ => None,
        }
    }

    /// Labels that count as objects when measuring recall.
    pub fn is_object(self) -> bool {
        matches!(self, LabelSource::Human | LabelSource::Pseudo)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthLabel {
    pub id: u64,
    pub image_id: ImageId,
    pub class_id: ClassId,
    pub bbox: BBox,
    pub source: LabelSource,
    /// 1 for human labels; the generating confidence otherwise.
    pub score: f64,
}

impl GroundTruthLabel {
    pub fn human(id: u64, image_id: ImageId, class_id: ClassId, bbox: BBox) -> Self {
        Self {
            id,
            image_id,
            class_id,
            bbox,
            source: LabelSource::Human,
            score: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    pub image_id: ImageId,
    pub class_id: ClassId,
    pub bbox: BBox,
    score: f64,
}

impl DetectionRecord {
    pub fn new(image_id: ImageId, class_id: ClassId, bbox: BBox, score: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::ScoreOutOfRange(score));
        }
        Ok(Self {
            image_id,
            class_id,
            bbox,
            score,
        })
    }

    pub fn score(&self) -> f64 {
        self.score
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub id: ImageId,
    pub width: u32,
    pub height: u32,
    pub file_name: String,
}

/// One annotated dataset `DS_i` together with its class set `C_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    images: Vec<Image>,
    labels: Vec<GroundTruthLabel>,
    categories: BTreeMap<ClassId, String>,
    image_index: BTreeMap<ImageId, usize>,
}

impl Dataset {
    /// Validates that image ids are unique and that every label points at a
    /// known image and at a declared class (or the background sentinel).
    pub fn new(
        images: Vec<Image>,
        labels: Vec<GroundTruthLabel>,
        categories: BTreeMap<ClassId, String>,
    ) -> Result<Self> {
        let mut image_index = BTreeMap::new();
        for (i, image) in images.iter().enumerate() {
            if image_index.insert(image.id, i).is_some() {
                return Err(Error::DuplicateImage(image.id));
            }
        }
        for label in &labels {
            if !image_index.contains_key(&label.image_id) {
                return Err(Error::UnknownImage {
                    image: label.image_id,
                    annotation: label.id,
                });
            }
            if !label.class_id.is_background() && !categories.contains_key(&label.class_id) {
                return Err(Error::UnknownClass {
                    class: label.class_id,
                    annotation: label.id,
                });
            }
            if !(0.0..=1.0).contains(&label.score) {
                return Err(Error::ScoreOutOfRange(label.score));
            }
        }
        Ok(Self {
            images,
            labels,
            categories,
            image_index,
        })
    }

    pub fn images(&self) -> &[Image] {
        &self.images
    }

    pub fn labels(&self) -> &[GroundTruthLabel] {
        &self.labels
    }

    pub fn categories(&self) -> &BTreeMap<ClassId, String> {
        &self.categories
    }

    pub fn class_set(&self) -> BTreeSet<ClassId> {
        self.categories.keys().copied().collect()
    }

    pub fn annotates(&self, class: ClassId) -> bool {
        self.categories.contains_key(&class)
    }

    pub fn image(&self, id: ImageId) -> Option<&Image> {
        self.image_index.get(&id).map(|&i| &self.images[i])
    }

    pub fn contains_image(&self, id: ImageId) -> bool {
        self.image_index.contains_key(&id)
    }

    pub fn max_label_id(&self) -> u64 {
        self.labels.iter().map(|l| l.id).max().unwrap_or(0)
    }

    pub fn into_parts(self) -> (Vec<Image>, Vec<GroundTruthLabel>, BTreeMap<ClassId, String>) {
        (self.images, self.labels, self.categories)
    }
}

/// `N` datasets with (nominally) disjoint class sets and the full class set
/// `C`, their union.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub datasets: Vec<Dataset>,
    pub full_class_set: BTreeSet<ClassId>,
}

impl DatasetBundle {
    pub fn from_datasets(datasets: Vec<Dataset>) -> Self {
        let full_class_set = datasets
            .iter()
            .flat_map(|d| d.categories.keys().copied())
            .collect();
        Self {
            datasets,
            full_class_set,
        }
    }

    /// Classes that dataset `index` lacks, `C \ C_i`.
    pub fn complement(&self, index: usize) -> Result<BTreeSet<ClassId>> {
        let ds = self
            .datasets
            .get(index)
            .ok_or(Error::UnknownDataset(index))?;
        Ok(self
            .full_class_set
            .iter()
            .copied()
            .filter(|c| !ds.annotates(*c))
            .collect())
    }

    pub fn total_images(&self) -> usize {
        self.datasets.iter().map(|d| d.images.len()).sum()
    }

    /// Merged category names, first dataset wins on conflicts.
    pub fn category_names(&self) -> BTreeMap<ClassId, String> {
        let mut names = BTreeMap::new();
        for ds in &self.datasets {
            for (c, n) in &ds.categories {
                names.entry(*c).or_insert_with(|| n.clone());
            }
        }
        names
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Finding {
    ClassOverlap {
        class: ClassId,
        first: usize,
        second: usize,
    },
    EmptyDataset(usize),
    DuplicateImage {
        image: ImageId,
        first: usize,
        second: usize,
    },
    /// A member dataset's class is absent from `full_class_set`.
    MissingFromFullSet(ClassId),
    /// `full_class_set` names a class no member dataset declares.
    NotInAnyDataset(ClassId),
}

impl Finding {
    pub fn severity(&self) -> Severity {
        match self {
            Finding::MissingFromFullSet(_) | Finding::NotInAnyDataset(_) => Severity::Error,
            _ => Severity::Warning,
        }
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Finding::ClassOverlap {
                class,
                first,
                second,
            } => write!(
                f,
                "class {class} is annotated by datasets {first} and {second}"
            ),
            Finding::EmptyDataset(i) => write!(f, "dataset {i} has no images"),
            Finding::DuplicateImage {
                image,
                first,
                second,
            } => write!(
                f,
                "image id {image} appears in datasets {first} and {second}"
            ),
            Finding::MissingFromFullSet(c) => {
                write!(
                    f,
                    "class {c} is declared by a dataset but missing from the full class set"
                )
            }
            Finding::NotInAnyDataset(c) => {
                write!(
                    f,
                    "class {c} is in the full class set but no dataset declares it"
                )
            }
        }
    }
}

/// Structural checks on a bundle. Never fails; the caller decides what to do
/// with error-severity findings.
pub fn validate_bundle(bundle: &DatasetBundle) -> Vec<Finding> {
    let mut findings = Vec::new();

    let mut class_owner: BTreeMap<ClassId, usize> = BTreeMap::new();
    let mut image_owner: BTreeMap<ImageId, usize> = BTreeMap::new();
    for (i, ds) in bundle.datasets.iter().enumerate() {
        if ds.images.is_empty() {
            findings.push(Finding::EmptyDataset(i));
        }
        for class in ds.categories.keys() {
            match class_owner.get(class) {
                Some(&first) => findings.push(Finding::ClassOverlap {
                    class: *class,
                    first,
                    second: i,
                }),
                None => {
                    class_owner.insert(*class, i);
                }
            }
        }
        for image in &ds.images {
            match image_owner.get(&image.id) {
                Some(&first) if first != i => findings.push(Finding::DuplicateImage {
                    image: image.id,
                    first,
                    second: i,
                }),
                Some(_) => {}
                None => {
                    image_owner.insert(image.id, i);
                }
            }
        }
    }

    for class in class_owner.keys() {
        if !bundle.full_class_set.contains(class) {
            findings.push(Finding::MissingFromFullSet(*class));
        }
    }
    for class in &bundle.full_class_set {
        if !class_owner.contains_key(class) {
            findings.push(Finding::NotInAnyDataset(*class));
        }
    }
    findings
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatioMode {
    Exact,
    ImageCountEstimate,
}

impl RatioMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RatioMode::Exact => "exact",
            RatioMode::ImageCountEstimate => "image_count_estimate",
        }
    }
}

/// Fraction `x_j` of class-`j` objects that carry human labels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelRatio {
    x: f64,
    pub mode: RatioMode,
}

impl LabelRatio {
    pub fn new(x: f64, mode: RatioMode) -> Result<Self> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::OutOfUnitInterval {
                name: "x",
                value: x,
            });
        }
        Ok(Self { x, mode })
    }

    /// `g / t`: labeled objects over all objects of the class.
    pub fn exact(labeled: u64, total: u64) -> Result<Self> {
        if total == 0 || labeled > total {
            return Err(Error::InvalidConfig(alloc::format!(
                "label ratio needs 0 <= g <= t and t > 0, got g={labeled}, t={total}"
            )));
        }
        Self::new(labeled as f64 / total as f64, RatioMode::Exact)
    }

    pub fn x(&self) -> f64 {
        self.x
    }
}

pub type LabelRatioTable = BTreeMap<ClassId, LabelRatio>;
