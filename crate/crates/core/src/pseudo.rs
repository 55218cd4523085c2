//! Turning teacher detections into pseudo labels and merging them with the
//! human annotations of a bundle.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{
    BBox, ClassId, Dataset, DatasetBundle, DetectionRecord, GroundTruthLabel, Image, ImageId,
    LabelSource,
};
use crate::threshold::{Method, ThresholdPolicy, Thresholds};

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub method: Method,
    /// Thresholds of every class the target dataset could receive labels for.
    pub thresholds: BTreeMap<ClassId, Thresholds>,
    pub detector: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabelSet {
    pub labels: Vec<GroundTruthLabel>,
    pub provenance: Provenance,
}

impl PseudoLabelSet {
    pub fn count(&self, source: LabelSource) -> usize {
        self.labels.iter().filter(|l| l.source == source).count()
    }

    /// Classes the set was generated for.
    pub fn target_classes(&self) -> BTreeSet<ClassId> {
        self.provenance.thresholds.keys().copied().collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GenerateOptions {
    pub detector: String,
    /// Emit one whole-image `pseudo_background` record for every image where
    /// all detections fall below their class's low threshold. Only applies
    /// when some target class has two thresholds with `tau_l < 1`.
    pub emit_background: bool,
}

/// Applies `policy` to `detections` on `target`.
///
/// Scores at or above the pseudo-label threshold become `pseudo` labels.
/// Under two thresholds, scores in `[tau_l, tau_h)` become `ignore` records;
/// anything lower is implicitly background.
pub fn generate(
    detections: &[DetectionRecord],
    policy: &ThresholdPolicy,
    target: &Dataset,
    options: &GenerateOptions,
) -> Result<PseudoLabelSet> {
    let mut next_id = target.max_label_id() + 1;
    let mut labels = Vec::new();
    // images holding a detection at or above its class's low threshold
    let mut active_images: BTreeSet<ImageId> = BTreeSet::new();

    for det in detections {
        if target.annotates(det.class_id) {
            return Err(Error::ClassAlreadyAnnotated {
                class: det.class_id,
            });
        }
        if !target.contains_image(det.image_id) {
            return Err(Error::UnknownImage {
                image: det.image_id,
                annotation: next_id,
            });
        }
        let t = policy
            .get(det.class_id)
            .ok_or(Error::MissingThreshold(det.class_id))?;
        let source = if t.keeps(det.score()) {
            LabelSource::Pseudo
        } else if t.ignores(det.score()) {
            LabelSource::Ignore
        } else {
            continue;
        };
        active_images.insert(det.image_id);
        labels.push(GroundTruthLabel {
            id: next_id,
            image_id: det.image_id,
            class_id: det.class_id,
            bbox: det.bbox,
            source,
            score: det.score(),
        });
        next_id += 1;
    }

    // a class with tau_l = 1 is not pseudo-labeled and says nothing about
    // background, so tau = 1 policies stay equivalent to no pseudo labels
    let labels_background = policy.entries().iter().any(|(c, t)| {
        !target.annotates(*c) && matches!(t, Thresholds::Dual { tau_l, .. } if *tau_l < 1.0)
    });
    if options.emit_background && labels_background {
        for image in target.images() {
            if active_images.contains(&image.id) {
                continue;
            }
            labels.push(GroundTruthLabel {
                id: next_id,
                image_id: image.id,
                class_id: ClassId::BACKGROUND,
                bbox: BBox::new(0.0, 0.0, image.width as f64, image.height as f64)?,
                source: LabelSource::PseudoBackground,
                score: 1.0,
            });
            next_id += 1;
        }
    }

    let thresholds = policy
        .entries()
        .iter()
        .filter(|(c, _)| !target.annotates(**c))
        .map(|(c, t)| (*c, *t))
        .collect();
    Ok(PseudoLabelSet {
        labels,
        provenance: Provenance {
            method: policy.method,
            thresholds,
            detector: options.detector.clone(),
        },
    })
}

/// Image and annotation ids of dataset `i` become `i * ID_STRIDE + id` in a
/// merged dataset.
pub const ID_STRIDE: u64 = 1_000_000_000_000;

pub fn merged_id(dataset: usize, id: u64) -> Result<u64> {
    if id >= ID_STRIDE {
        return Err(Error::IdOutOfNamespace(id));
    }
    (dataset as u64)
        .checked_mul(ID_STRIDE)
        .and_then(|base| base.checked_add(id))
        .ok_or(Error::IdOutOfNamespace(id))
}

/// Inverse of [`merged_id`]: `(dataset index, original id)`.
pub fn split_merged_id(id: u64) -> (usize, u64) {
    ((id / ID_STRIDE) as usize, id % ID_STRIDE)
}

/// One training dataset over the full class set: every human label kept
/// as is, each dataset's pseudo labels appended after its own labels.
pub fn merge_bundle(
    bundle: &DatasetBundle,
    pseudo_sets: &BTreeMap<usize, PseudoLabelSet>,
) -> Result<Dataset> {
    if let Some((&i, _)) = pseudo_sets.range(bundle.datasets.len()..).next() {
        return Err(Error::UnknownDataset(i));
    }

    let mut images = Vec::with_capacity(bundle.total_images());
    let mut labels = Vec::new();
    for (i, ds) in bundle.datasets.iter().enumerate() {
        for image in ds.images() {
            images.push(Image {
                id: ImageId(merged_id(i, image.id.0)?),
                ..image.clone()
            });
        }
        let extra = pseudo_sets
            .get(&i)
            .map(|s| s.labels.as_slice())
            .unwrap_or(&[]);
        for label in ds.labels().iter().chain(extra) {
            if label.source != LabelSource::Human && ds.annotates(label.class_id) {
                return Err(Error::ClassAlreadyAnnotated {
                    class: label.class_id,
                });
            }
            if !ds.contains_image(label.image_id) {
                return Err(Error::UnknownImage {
                    image: label.image_id,
                    annotation: label.id,
                });
            }
            labels.push(GroundTruthLabel {
                id: merged_id(i, label.id)?,
                image_id: ImageId(merged_id(i, label.image_id.0)?),
                ..label.clone()
            });
        }
    }

    let mut categories = bundle.category_names();
    for c in &bundle.full_class_set {
        categories.entry(*c).or_insert_with(|| c.0.to_string());
    }
    Dataset::new(images, labels, categories)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn bx(x: f64) -> BBox {
        BBox::new(x, 0.0, 10.0, 10.0).unwrap()
    }

    fn ds(images: &[u64], classes: &[u32], labels: Vec<GroundTruthLabel>) -> Dataset {
        let images = images
            .iter()
            .map(|&i| Image {
                id: ImageId(i),
                width: 100,
                height: 80,
                file_name: alloc::format!("img{i}.jpg"),
            })
            .collect();
        let cats = classes
            .iter()
            .map(|&c| (ClassId(c), alloc::format!("c{c}")))
            .collect();
        Dataset::new(images, labels, cats).unwrap()
    }

    fn det(img: u64, class: u32, score: f64) -> DetectionRecord {
        DetectionRecord::new(ImageId(img), ClassId(class), bx(score * 10.0), score).unwrap()
    }

    fn policy(t: Thresholds) -> ThresholdPolicy {
        ThresholdPolicy::uniform(Method::Manual, [ClassId(2)], t).unwrap()
    }

    fn target() -> Dataset {
        ds(
            &[1, 2],
            &[1],
            vec![GroundTruthLabel::human(4, ImageId(1), ClassId(1), bx(0.0))],
        )
    }

    #[test]
    fn single_threshold_keeps_scores_at_or_above_tau() {
        let p = policy(Thresholds::Single { tau: 0.8 });
        let s = generate(
            &[det(1, 2, 0.85), det(1, 2, 0.8), det(2, 2, 0.79)],
            &p,
            &target(),
            &Default::default(),
        )
        .unwrap();
        assert_eq!(s.count(LabelSource::Pseudo), 2);
        assert_eq!(s.labels.len(), 2);
        assert_eq!(s.labels[0].id, 5);
        assert_eq!(s.labels[0].score, 0.85);
        assert_eq!(s.provenance.thresholds.len(), 1);
    }

    #[test]
    fn dual_band_becomes_ignore() {
        let p = policy(Thresholds::Dual {
            tau_h: 0.8,
            tau_l: 0.2,
        });
        let s = generate(&[det(1, 2, 0.5)], &p, &target(), &Default::default()).unwrap();
        assert_eq!(s.labels.len(), 1);
        assert_eq!(s.labels[0].source, LabelSource::Ignore);
        let s = generate(&[det(1, 2, 0.1)], &p, &target(), &Default::default()).unwrap();
        assert!(s.labels.is_empty());
    }

    #[test]
    fn equal_thresholds_emit_no_ignore() {
        let p = policy(Thresholds::Dual {
            tau_h: 0.5,
            tau_l: 0.5,
        });
        let dets: Vec<_> = (0..10).map(|i| det(1, 2, i as f64 / 10.0)).collect();
        let s = generate(&dets, &p, &target(), &Default::default()).unwrap();
        assert_eq!(s.count(LabelSource::Ignore), 0);
        assert_eq!(s.count(LabelSource::Pseudo), 5);
    }

    #[test]
    fn background_records_for_quiet_images() {
        let p = policy(Thresholds::Dual {
            tau_h: 0.8,
            tau_l: 0.2,
        });
        let opts = GenerateOptions {
            detector: "teacher".into(),
            emit_background: true,
        };
        let s = generate(&[det(1, 2, 0.5), det(2, 2, 0.1)], &p, &target(), &opts).unwrap();
        let bg: Vec<_> = s
            .labels
            .iter()
            .filter(|l| l.source == LabelSource::PseudoBackground)
            .collect();
        assert_eq!(bg.len(), 1);
        assert_eq!(bg[0].image_id, ImageId(2));
        assert_eq!(bg[0].class_id, ClassId::BACKGROUND);
        assert_eq!(bg[0].bbox.to_xywh(), [0.0, 0.0, 100.0, 80.0]);
        assert_eq!(s.provenance.detector, "teacher");

        let closed = policy(Thresholds::Dual {
            tau_h: 1.0,
            tau_l: 1.0,
        });
        let s = generate(&[det(1, 2, 0.5)], &closed, &target(), &opts).unwrap();
        assert!(s.labels.is_empty());
    }

    #[test]
    fn rejects_classes_the_target_annotates() {
        let p = ThresholdPolicy::uniform(
            Method::Manual,
            [ClassId(1), ClassId(2)],
            Thresholds::Single { tau: 0.5 },
        )
        .unwrap();
        assert_eq!(
            generate(&[det(1, 1, 0.9)], &p, &target(), &Default::default()),
            Err(Error::ClassAlreadyAnnotated { class: ClassId(1) })
        );
        let p = policy(Thresholds::Single { tau: 0.5 });
        assert_eq!(
            generate(&[det(1, 3, 0.9)], &p, &target(), &Default::default()),
            Err(Error::MissingThreshold(ClassId(3)))
        );
    }

    fn bundle() -> DatasetBundle {
        DatasetBundle::from_datasets(vec![
            target(),
            ds(
                &[1],
                &[2],
                vec![GroundTruthLabel::human(1, ImageId(1), ClassId(2), bx(5.0))],
            ),
        ])
    }

    #[test]
    fn merge_without_pseudo_labels_concatenates() {
        let b = bundle();
        let m = merge_bundle(&b, &BTreeMap::new()).unwrap();
        assert_eq!(m.images().len(), 3);
        assert_eq!(m.labels().len(), 2);
        assert_eq!(m.class_set(), b.full_class_set);
        assert_eq!(m.images()[2].id, ImageId(ID_STRIDE + 1));
        assert_eq!(split_merged_id(m.labels()[1].id), (1, 1));
        assert_eq!(m.labels()[1].bbox, bx(5.0));
    }

    #[test]
    fn merge_appends_pseudo_labels() {
        let b = bundle();
        let p = policy(Thresholds::Single { tau: 0.5 });
        let s = generate(&[det(2, 2, 0.9)], &p, &b.datasets[0], &Default::default()).unwrap();
        let m = merge_bundle(&b, &[(0, s)].into_iter().collect()).unwrap();
        let humans = m
            .labels()
            .iter()
            .filter(|l| l.source == LabelSource::Human)
            .count();
        assert_eq!(humans, 2);
        assert_eq!(m.labels()[1].source, LabelSource::Pseudo);
        assert_eq!(m.labels()[1].image_id, ImageId(2));
    }

    #[test]
    fn merge_rejects_pseudo_label_for_own_class() {
        let b = bundle();
        let mut s = PseudoLabelSet {
            labels: vec![GroundTruthLabel::human(9, ImageId(1), ClassId(1), bx(0.0))],
            provenance: Provenance {
                method: Method::Manual,
                thresholds: BTreeMap::new(),
                detector: String::new(),
            },
        };
        s.labels[0].source = LabelSource::Pseudo;
        assert_eq!(
            merge_bundle(&b, &[(0, s.clone())].into_iter().collect()),
            Err(Error::ClassAlreadyAnnotated { class: ClassId(1) })
        );
        assert_eq!(
            merge_bundle(&b, &[(5, s)].into_iter().collect()),
            Err(Error::UnknownDataset(5))
        );
    }

    #[test]
    fn id_namespace() {
        assert_eq!(merged_id(3, 17).unwrap(), 3 * ID_STRIDE + 17);
        assert_eq!(split_merged_id(3 * ID_STRIDE + 17), (3, 17));
        assert!(merged_id(0, ID_STRIDE).is_err());
    }
}
