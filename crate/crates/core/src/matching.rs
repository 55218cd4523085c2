//! Greedy IoU matching of detections to ground truth, one class at a time.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::borrow::Borrow;

use crate::error::{Error, Result};
use crate::model::{
    BBox, ClassId, Dataset, DetectionRecord, GroundTruthLabel, ImageId, LabelSource,
};

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

/// Intersection over union of two closed rectangles.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = a.right().min(b.right()) - a.x().max(b.x());
    let ih = a.bottom().min(b.bottom()) - a.y().max(b.y());
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// A detection tagged true or false positive.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchRecord {
    pub class_id: ClassId,
    pub image_id: ImageId,
    pub score: f64,
    /// Annotation id of the ground-truth label this detection claimed.
    pub matched_gt: Option<u64>,
}

impl MatchRecord {
    pub fn is_tp(&self) -> bool {
        self.matched_gt.is_some()
    }
}

/// Match records of one class and the number of ground-truth objects they
/// were matched against.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMatches {
    pub class_id: ClassId,
    pub records: Vec<MatchRecord>,
    pub n_gt: u64,
}

impl ClassMatches {
    pub fn true_positives(&self) -> u64 {
        self.records.iter().filter(|r| r.is_tp()).count() as u64
    }
}

fn check_iou_threshold(t: f64) -> Result<()> {
    if t > 0.0 && t <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidIouThreshold(t))
    }
}

/// Greedy score-ordered matching for a single class.
///
/// Detections are visited by descending score (stable on input order). Each
/// one claims the unmatched ground-truth box of highest IoU in the same
/// image, lowest index on ties, if that IoU reaches `iou_threshold`.
/// Otherwise it is a false positive, unless it overlaps an ignore-flagged
/// label by at least `iou_threshold`, in which case it is dropped.
///
/// Output records are in visiting order. `n_gt` counts the human and pseudo
/// labels among `gts`.
pub fn match_class<D, G>(
    class_id: ClassId,
    detections: &[D],
    gts: &[G],
    iou_threshold: f64,
) -> Result<ClassMatches>
where
    D: Borrow<DetectionRecord>,
    G: Borrow<GroundTruthLabel>,
{
    check_iou_threshold(iou_threshold)?;
    for d in detections {
        let found = d.borrow().class_id;
        if found != class_id {
            return Err(Error::MixedClasses {
                expected: class_id,
                found,
            });
        }
    }
    for g in gts {
        let found = g.borrow().class_id;
        if found != class_id {
            return Err(Error::MixedClasses {
                expected: class_id,
                found,
            });
        }
    }

    let mut by_image: BTreeMap<ImageId, Vec<usize>> = BTreeMap::new();
    for (i, g) in gts.iter().enumerate() {
        by_image.entry(g.borrow().image_id).or_default().push(i);
    }

    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| {
        let (sa, sb) = (
            detections[a].borrow().score(),
            detections[b].borrow().score(),
        );
        sb.total_cmp(&sa)
    });

    let mut taken = alloc::vec![false; gts.len()];
    let mut records = Vec::with_capacity(detections.len());
    for di in order {
        let det = detections[di].borrow();
        let candidates = by_image
            .get(&det.image_id)
            .map(Vec::as_slice)
            .unwrap_or(&[]);

        let mut best: Option<(usize, f64)> = None;
        let mut hits_ignore = false;
        for &gi in candidates {
            let gt = gts[gi].borrow();
            let overlap = iou(&det.bbox, &gt.bbox);
            match gt.source {
                LabelSource::Ignore => hits_ignore |= overlap >= iou_threshold,
                LabelSource::PseudoBackground => {}
                LabelSource::Human | LabelSource::Pseudo => {
                    if !taken[gi] && best.is_none_or(|(_, b)| overlap > b) {
                        best = Some((gi, overlap));
                    }
                }
            }
        }

        let matched = match best {
            Some((gi, overlap)) if overlap >= iou_threshold => {
                taken[gi] = true;
                Some(gts[gi].borrow().id)
            }
            _ if hits_ignore => continue,
            _ => None,
        };
        records.push(MatchRecord {
            class_id,
            image_id: det.image_id,
            score: det.score(),
            matched_gt: matched,
        });
    }

    let n_gt = gts
        .iter()
        .filter(|g| Borrow::<GroundTruthLabel>::borrow(*g).source.is_object())
        .count() as u64;
    Ok(ClassMatches {
        class_id,
        records,
        n_gt,
    })
}

/// Matches `detections` against every class `truth` annotates. Detections of
/// classes outside the truth's class set are skipped: there is nothing to
/// judge them against.
pub fn match_dataset(
    detections: &[DetectionRecord],
    truth: &Dataset,
    iou_threshold: f64,
) -> Result<BTreeMap<ClassId, ClassMatches>> {
    let (dets, gts) = group_by_class(detections, truth);
    dets.into_iter()
        .zip(gts)
        .map(|((class, d), (_, g))| Ok((class, match_class(class, &d, &g, iou_threshold)?)))
        .collect()
}

/// Per-class work units for [`match_class`], keyed by every class the truth
/// annotates (empty vectors included).
#[allow(clippy::type_complexity)]
pub fn group_by_class<'a>(
    detections: &'a [DetectionRecord],
    truth: &'a Dataset,
) -> (
    BTreeMap<ClassId, Vec<&'a DetectionRecord>>,
    BTreeMap<ClassId, Vec<&'a GroundTruthLabel>>,
) {
    let mut dets: BTreeMap<ClassId, Vec<&DetectionRecord>> = truth
        .class_set()
        .into_iter()
        .map(|c| (c, Vec::new()))
        .collect();
    let mut gts: BTreeMap<ClassId, Vec<&GroundTruthLabel>> = truth
        .class_set()
        .into_iter()
        .map(|c| (c, Vec::new()))
        .collect();
    for d in detections {
        if let Some(v) = dets.get_mut(&d.class_id) {
            v.push(d);
        }
    }
    for g in truth.labels() {
        if let Some(v) = gts.get_mut(&g.class_id) {
            v.push(g);
        }
    }
    (dets, gts)
}
