//! mAP50, pseudo-label quality, and the grid-search baseline.
//!
//! Grid search needs a score per candidate threshold. Training a student per
//! candidate is outside this crate, so scoring goes through [`Evaluator`];
//! [`PseudoQualityEvaluator`] is the built-in oracle that measures the pseudo
//! labels of a merged dataset against a complete annotation.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{Error, Result};
use crate::matching::{group_by_class, match_class};
use crate::model::{
    ClassId, Dataset, DatasetBundle, DetectionRecord, GroundTruthLabel, ImageId, LabelSource,
};
use crate::pseudo::{generate, merge_bundle, split_merged_id, GenerateOptions, PseudoLabelSet};
use crate::threshold::{f_beta, pr_curve, Beta, Method, PrCurve, ThresholdPolicy, Thresholds};

pub const AP_IOU_THRESHOLD: f64 = 0.5;

/// All-point interpolated AP: recall steps weighted by the precision
/// envelope (maximum precision at any higher recall). `None` if `n_gt = 0`.
pub fn average_precision(curve: &PrCurve) -> Option<f64> {
    if curve.n_gt == 0 {
        return None;
    }
    let pts = curve.points();
    let mut envelope: Vec<f64> = pts.iter().map(|p| p.precision).collect();
    for i in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[i] = envelope[i].max(envelope[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (p, env) in pts.iter().zip(&envelope) {
        ap += (p.recall - prev_recall) * env;
        prev_recall = p.recall;
    }
    Some(ap)
}

/// AP of one class at IoU 0.5; `None` when the truth has no object of it.
pub fn average_precision_50(
    detections: &[DetectionRecord],
    truth: &Dataset,
    class: ClassId,
) -> Result<Option<f64>> {
    let dets: Vec<&DetectionRecord> = detections.iter().filter(|d| d.class_id == class).collect();
    let gts: Vec<&GroundTruthLabel> = truth
        .labels()
        .iter()
        .filter(|g| g.class_id == class)
        .collect();
    let m = match_class(class, &dets, &gts, AP_IOU_THRESHOLD)?;
    Ok(average_precision(&pr_curve(class, &m.records, m.n_gt)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapReport {
    /// AP of every class with at least one ground-truth object.
    pub per_class: BTreeMap<ClassId, f64>,
    pub mean: f64,
}

/// mAP50 over the classes the truth annotates; classes without objects are
/// left out of the mean.
pub fn map_50(detections: &[DetectionRecord], truth: &Dataset) -> Result<MapReport> {
    map_at(detections, truth, AP_IOU_THRESHOLD)
}

pub fn map_at(
    detections: &[DetectionRecord],
    truth: &Dataset,
    iou_threshold: f64,
) -> Result<MapReport> {
    let (dets, gts) = group_by_class(detections, truth);
    let mut per_class = BTreeMap::new();
    for ((class, d), (_, g)) in dets.into_iter().zip(gts) {
        let m = match_class(class, &d, &g, iou_threshold)?;
        if let Some(ap) = average_precision(&pr_curve(class, &m.records, m.n_gt)?) {
            per_class.insert(class, ap);
        }
    }
    let mean = if per_class.is_empty() {
        0.0
    } else {
        per_class.values().sum::<f64>() / per_class.len() as f64
    };
    Ok(MapReport { per_class, mean })
}

/// Quality of a pseudo-label set measured against a full annotation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PseudoQuality {
    pub tp: u64,
    pub fp: u64,
    pub n_gt: u64,
    /// Classes the truth does not annotate; they are left out.
    pub excluded: Vec<ClassId>,
}

impl PseudoQuality {
    /// 1 when no pseudo labels were emitted.
    pub fn precision(&self) -> f64 {
        if self.tp + self.fp == 0 {
            1.0
        } else {
            self.tp as f64 / (self.tp + self.fp) as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.n_gt == 0 {
            0.0
        } else {
            self.tp as f64 / self.n_gt as f64
        }
    }

    pub fn f1(&self) -> f64 {
        f_beta(self.precision(), self.recall(), Beta::ONE)
    }

    /// Micro-average of two measurements.
    pub fn combine(mut self, other: PseudoQuality) -> PseudoQuality {
        self.tp += other.tp;
        self.fp += other.fp;
        self.n_gt += other.n_gt;
        self.excluded.extend(other.excluded);
        self.excluded.sort();
        self.excluded.dedup();
        self
    }
}

/// Scores `pseudo` labels of `classes` against the objects of those classes
/// in `truth`, treating every pseudo label as a score-1 detection matched at
/// IoU 0.5.
fn quality_of<'a>(
    pseudo: impl IntoIterator<Item = &'a GroundTruthLabel>,
    classes: &BTreeSet<ClassId>,
    truth: &Dataset,
    image_map: impl Fn(ImageId) -> ImageId,
) -> Result<PseudoQuality> {
    let mut dets: BTreeMap<ClassId, Vec<DetectionRecord>> = BTreeMap::new();
    for l in pseudo {
        if l.source == LabelSource::Pseudo && classes.contains(&l.class_id) {
            let d = DetectionRecord::new(image_map(l.image_id), l.class_id, l.bbox, 1.0)?;
            dets.entry(l.class_id).or_default().push(d);
        }
    }
    let mut q = PseudoQuality::default();
    for &class in classes {
        if !truth.annotates(class) {
            q.excluded.push(class);
            continue;
        }
        let gts: Vec<&GroundTruthLabel> = truth
            .labels()
            .iter()
            .filter(|g| g.class_id == class)
            .collect();
        let d = dets.get(&class).map(Vec::as_slice).unwrap_or(&[]);
        let m = match_class(class, d, &gts, AP_IOU_THRESHOLD)?;
        let tp = m.true_positives();
        q.tp += tp;
        q.fp += m.records.len() as u64 - tp;
        q.n_gt += m.n_gt;
    }
    Ok(q)
}

/// Precision, recall and F1 of `pseudo` against `full_truth`, which must
/// cover exactly the images the pseudo labels were generated for. Every
/// class the set targets counts toward recall, including classes that
/// received no labels.
pub fn evaluate_pseudo_quality(
    pseudo: &PseudoLabelSet,
    full_truth: &Dataset,
) -> Result<PseudoQuality> {
    let mut classes = pseudo.target_classes();
    classes.extend(
        pseudo
            .labels
            .iter()
            .filter(|l| l.source == LabelSource::Pseudo)
            .map(|l| l.class_id),
    );
    quality_of(&pseudo.labels, &classes, full_truth, |id| id)
}

/// Stand-in for "train a student on the merged dataset and evaluate it".
/// Higher scores are better; implementations must be deterministic.
pub trait Evaluator {
    type Error;

    fn evaluate(&self, merged: &Dataset) -> core::result::Result<f64, Self::Error>;
}

/// F1 of the pseudo labels inside a merged dataset against the complete
/// annotation of every member dataset's images.
#[derive(Debug, Clone)]
pub struct PseudoQualityEvaluator {
    truths: Vec<Dataset>,
    complements: Vec<BTreeSet<ClassId>>,
}

impl PseudoQualityEvaluator {
    /// `full_truth[i]` annotates every class on the images of dataset `i`.
    pub fn new(bundle: &DatasetBundle, full_truth: Vec<Dataset>) -> Result<Self> {
        if full_truth.len() != bundle.datasets.len() {
            return Err(Error::InvalidConfig(alloc::format!(
                "{} full-truth datasets for a bundle of {}",
                full_truth.len(),
                bundle.datasets.len()
            )));
        }
        let complements = (0..bundle.datasets.len())
            .map(|i| bundle.complement(i))
            .collect::<Result<_>>()?;
        Ok(Self {
            truths: full_truth,
            complements,
        })
    }

    pub fn quality(&self, merged: &Dataset) -> Result<PseudoQuality> {
        let mut per_dataset: Vec<Vec<&GroundTruthLabel>> =
            alloc::vec![Vec::new(); self.truths.len()];
        for l in merged.labels() {
            let (i, _) = split_merged_id(l.image_id.0);
            per_dataset
                .get_mut(i)
                .ok_or(Error::UnknownDataset(i))?
                .push(l);
        }
        let mut total = PseudoQuality::default();
        for (i, labels) in per_dataset.into_iter().enumerate() {
            let q = quality_of(labels, &self.complements[i], &self.truths[i], |id| {
                ImageId(split_merged_id(id.0).1)
            })?;
            total = total.combine(q);
        }
        Ok(total)
    }
}

impl Evaluator for PseudoQualityEvaluator {
    type Error = Error;

    fn evaluate(&self, merged: &Dataset) -> Result<f64> {
        Ok(self.quality(merged)?.f1())
    }
}

/// Candidate thresholds for grid search, applied to every class at once.
#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    Single(Vec<f64>),
    Dual(Vec<(f64, f64)>),
}

impl GridSpec {
    /// `0.2, 0.3, ..., 0.9, 1`.
    pub fn standard_single() -> Self {
        GridSpec::Single(alloc::vec![0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0])
    }

    /// All pairs `tau_h >= tau_l` from `0.2, 0.4, 0.6, 0.8, 1.0` (15 pairs).
    pub fn standard_dual() -> Self {
        Self::dual_from_pool(&[0.2, 0.4, 0.6, 0.8, 1.0])
    }

    pub fn dual_from_pool(pool: &[f64]) -> Self {
        let mut pairs = Vec::new();
        for &h in pool {
            for &l in pool {
                if h >= l {
                    pairs.push((h, l));
                }
            }
        }
        GridSpec::Dual(pairs)
    }

    pub fn candidates(&self) -> Vec<Thresholds> {
        match self {
            GridSpec::Single(v) => v.iter().map(|&tau| Thresholds::Single { tau }).collect(),
            GridSpec::Dual(v) => v
                .iter()
                .map(|&(tau_h, tau_l)| Thresholds::Dual { tau_h, tau_l })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.candidates();
        if c.is_empty() {
            return Err(Error::EmptyGrid);
        }
        let mut scratch = ThresholdPolicy::new(Method::Grid, None);
        for t in c {
            scratch.insert(ClassId(0), t)?;
        }
        Ok(())
    }
}

/// Everything grid search and the Fmax methods share when turning a policy
/// into a merged training set.
pub struct PseudoLabelRun<'a> {
    pub bundle: &'a DatasetBundle,
    /// Teacher detections on each dataset, in bundle order.
    pub detections: &'a [Vec<DetectionRecord>],
    pub options: GenerateOptions,
}

impl PseudoLabelRun<'_> {
    pub fn pseudo_sets(&self, policy: &ThresholdPolicy) -> Result<BTreeMap<usize, PseudoLabelSet>> {
        if self.detections.len() != self.bundle.datasets.len() {
            return Err(Error::InvalidConfig(alloc::format!(
                "{} detection lists for a bundle of {}",
                self.detections.len(),
                self.bundle.datasets.len()
            )));
        }
        self.bundle
            .datasets
            .iter()
            .zip(self.detections)
            .enumerate()
            .map(|(i, (ds, dets))| Ok((i, generate(dets, policy, ds, &self.options)?)))
            .collect()
    }

    pub fn merged(&self, policy: &ThresholdPolicy) -> Result<Dataset> {
        merge_bundle(self.bundle, &self.pseudo_sets(policy)?)
    }

    /// The same thresholds for every class of the bundle.
    pub fn candidate_policy(&self, candidate: Thresholds) -> Result<ThresholdPolicy> {
        ThresholdPolicy::uniform(
            Method::Grid,
            self.bundle.full_class_set.iter().copied(),
            candidate,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GridFailure<E> {
    Pipeline(Error),
    Evaluator(E),
}

/// Grid search stopped at `candidate`; `partial` holds the scores computed
/// before it.
#[derive(Debug, Clone, PartialEq)]
pub struct GridError<E> {
    pub candidate: Thresholds,
    pub partial: Vec<(Thresholds, f64)>,
    pub failure: GridFailure<E>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridReport {
    pub table: Vec<(Thresholds, f64)>,
    pub best: Thresholds,
    pub best_score: f64,
    pub policy: ThresholdPolicy,
}

fn candidate_key(t: &Thresholds) -> (f64, f64) {
    (t.high(), t.low())
}

impl GridReport {
    /// Picks the best-scoring candidate, ties toward the higher threshold
    /// (lexicographically larger pair).
    pub fn from_table(table: Vec<(Thresholds, f64)>, classes: &BTreeSet<ClassId>) -> Result<Self> {
        let (best, best_score) = table
            .iter()
            .copied()
            .max_by(compare_candidates)
            .ok_or(Error::EmptyGrid)?;
        let policy = ThresholdPolicy::uniform(Method::Grid, classes.iter().copied(), best)?;
        Ok(Self {
            table,
            best,
            best_score,
            policy,
        })
    }
}

/// Scores one candidate: build the uniform policy, pseudo-label, merge, and
/// evaluate.
pub fn evaluate_candidate<E: Evaluator>(
    run: &PseudoLabelRun<'_>,
    candidate: Thresholds,
    evaluator: &E,
) -> core::result::Result<f64, GridFailure<E::Error>> {
    let policy = run
        .candidate_policy(candidate)
        .map_err(GridFailure::Pipeline)?;
    let merged = run.merged(&policy).map_err(GridFailure::Pipeline)?;
    evaluator.evaluate(&merged).map_err(GridFailure::Evaluator)
}

/// Sequential grid search over `spec`, scoring candidates in order.
pub fn grid_search<E: Evaluator>(
    run: &PseudoLabelRun<'_>,
    spec: &GridSpec,
    evaluator: &E,
) -> core::result::Result<GridReport, GridError<E::Error>> {
    let candidates = spec.candidates();
    let mut table = Vec::with_capacity(candidates.len());
    let fail = |candidate, partial, failure| GridError {
        candidate,
        partial,
        failure,
    };
    if let Err(e) = spec.validate() {
        let first = candidates
            .first()
            .copied()
            .unwrap_or(Thresholds::Single { tau: 1.0 });
        return Err(fail(first, table, GridFailure::Pipeline(e)));
    }
    for candidate in candidates {
        match evaluate_candidate(run, candidate, evaluator) {
            Ok(score) => table.push((candidate, score)),
            Err(failure) => return Err(fail(candidate, table, failure)),
        }
    }
    GridReport::from_table(table, &run.bundle.full_class_set).map_err(|e| {
        fail(
            Thresholds::Single { tau: 1.0 },
            Vec::new(),
            GridFailure::Pipeline(e),
        )
    })
}

/// Orders candidates by score, then by threshold (higher wins).
pub fn compare_candidates(a: &(Thresholds, f64), b: &(Thresholds, f64)) -> Ordering {
    a.1.total_cmp(&b.1).then_with(|| {
        let (ka, kb) = (candidate_key(&a.0), candidate_key(&b.0));
        ka.0.total_cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
    })
}
