//! Synthetic worlds, class-split bundles and simulated teacher detectors.
//!
//! Every random draw comes from a ChaCha8 generator seeded by the caller's
//! seed, with one stream per image, so results are independent of the order
//! in which images are processed.

mod beta_fn;

pub use beta_fn::{beta_survival, regularized_incomplete_beta};

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma, Poisson};

use crate::error::{Error, Result};
use crate::model::{
    BBox, ClassId, Dataset, DatasetBundle, DetectionRecord, GroundTruthLabel, Image, ImageId,
};

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn invalid(msg: alloc::string::String) -> Error {
    Error::InvalidConfig(msg)
}

/// Poisson draw; `Poisson` rejects a zero rate.
fn poisson(rng: &mut ChaCha8Rng, rate: f64) -> Result<u64> {
    if rate <= 0.0 {
        return Ok(0);
    }
    let d = Poisson::new(rate).map_err(|e| invalid(format!("poisson rate {rate}: {e}")))?;
    Ok(d.sample(rng) as u64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub n_images: usize,
    pub n_classes: usize,
    /// Mean objects per image.
    pub objects_mean: f64,
    /// 0 gives Poisson counts; `d > 0` a negative binomial with variance
    /// `mean + d * mean^2`.
    pub objects_dispersion: f64,
    pub image_width: u32,
    pub image_height: u32,
    pub box_min: f64,
    pub box_max: f64,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            n_images: 1000,
            n_classes: 10,
            objects_mean: 3.0,
            objects_dispersion: 0.0,
            image_width: 640,
            image_height: 480,
            box_min: 20.0,
            box_max: 120.0,
            seed: 0,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_images == 0 || self.n_classes == 0 {
            return Err(invalid(
                "world needs at least one image and one class".into(),
            ));
        }
        if self.n_classes >= u32::MAX as usize {
            return Err(invalid(format!("too many classes: {}", self.n_classes)));
        }
        if !(self.objects_mean >= 0.0 && self.objects_mean.is_finite())
            || self.objects_dispersion.is_nan()
            || self.objects_dispersion < 0.0
        {
            return Err(invalid(
                "object count parameters must be non-negative".into(),
            ));
        }
        let limit = self.image_width.min(self.image_height) as f64;
        if !(self.box_min > 0.0 && self.box_min <= self.box_max && self.box_max <= limit) {
            return Err(invalid(format!(
                "box sizes must satisfy 0 < box_min <= box_max <= {limit}, got {}..{}",
                self.box_min, self.box_max
            )));
        }
        Ok(())
    }
}

fn object_count(rng: &mut ChaCha8Rng, config: &WorldConfig) -> Result<u64> {
    let rate = if config.objects_dispersion > 0.0 && config.objects_mean > 0.0 {
        let shape = 1.0 / config.objects_dispersion;
        let g = Gamma::new(shape, config.objects_mean * config.objects_dispersion)
            .map_err(|e| invalid(format!("gamma: {e}")))?;
        g.sample(rng)
    } else {
        config.objects_mean
    };
    poisson(rng, rate)
}

/// A fully annotated dataset: image ids `1..=n_images`, classes
/// `0..n_classes`.
pub fn generate_world(config: &WorldConfig) -> Result<Dataset> {
    config.validate()?;
    let (w, h) = (config.image_width as f64, config.image_height as f64);
    let mut images = Vec::with_capacity(config.n_images);
    let mut labels = Vec::new();
    let mut next_label = 1;
    for i in 0..config.n_images {
        let id = ImageId(i as u64 + 1);
        images.push(Image {
            id,
            width: config.image_width,
            height: config.image_height,
            file_name: format!("synth_{:06}.jpg", id.0),
        });
        let mut rng = stream(config.seed, id.0);
        for _ in 0..object_count(&mut rng, config)? {
            let class = ClassId(rng.random_range(0..config.n_classes as u32));
            let bw = rng.random_range(config.box_min..=config.box_max);
            let bh = rng.random_range(config.box_min..=config.box_max);
            let x = rng.random_range(0.0..=w - bw);
            let y = rng.random_range(0.0..=h - bh);
            labels.push(GroundTruthLabel::human(
                next_label,
                id,
                class,
                BBox::new(x, y, bw, bh)?,
            ));
            next_label += 1;
        }
    }
    let categories = (0..config.n_classes as u32)
        .map(|c| (ClassId(c), format!("class_{c}")))
        .collect();
    Dataset::new(images, labels, categories)
}

/// A class-split bundle and, per member dataset, the complete annotation of
/// its images (every class), for oracle evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub bundle: DatasetBundle,
    pub full_truth: Vec<Dataset>,
}

/// Splits a fully annotated world into `n_splits` datasets.
///
/// Images are shuffled with `seed` and cut into near-equal contiguous
/// chunks. Class `c` belongs to dataset `c mod n_splits`; each dataset keeps
/// only annotations of its own classes and drops images left without any.
pub fn partition_classes(world: &Dataset, n_splits: usize, seed: u64) -> Result<Partition> {
    let n_classes = world.categories().len();
    if n_splits < 2 {
        return Err(invalid(format!("need at least 2 splits, got {n_splits}")));
    }
    if n_splits > n_classes {
        return Err(Error::TooManySplits {
            n_splits,
            n_classes,
        });
    }

    let mut order: Vec<usize> = (0..world.images().len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut by_image: BTreeMap<ImageId, Vec<&GroundTruthLabel>> = BTreeMap::new();
    for l in world.labels() {
        by_image.entry(l.image_id).or_default().push(l);
    }

    let n = order.len();
    let mut datasets = Vec::with_capacity(n_splits);
    let mut full_truth = Vec::with_capacity(n_splits);
    for split in 0..n_splits {
        let own: BTreeMap<ClassId, alloc::string::String> = world
            .categories()
            .iter()
            .filter(|(c, _)| c.0 as usize % n_splits == split)
            .map(|(c, name)| (*c, name.clone()))
            .collect();
        let mut chunk: Vec<&Image> = order[split * n / n_splits..(split + 1) * n / n_splits]
            .iter()
            .map(|&i| &world.images()[i])
            .collect();
        chunk.sort_by_key(|im| im.id);

        let mut images = Vec::new();
        let mut labels = Vec::new();
        let mut all_labels = Vec::new();
        for image in chunk {
            let objects = by_image.get(&image.id).map(Vec::as_slice).unwrap_or(&[]);
            let kept: Vec<GroundTruthLabel> = objects
                .iter()
                .filter(|l| own.contains_key(&l.class_id))
                .map(|l| (*l).clone())
                .collect();
            if kept.is_empty() {
                continue;
            }
            images.push(image.clone());
            labels.extend(kept);
            all_labels.extend(objects.iter().map(|l| (*l).clone()));
        }
        full_truth.push(Dataset::new(
            images.clone(),
            all_labels,
            world.categories().clone(),
        )?);
        datasets.push(Dataset::new(images, labels, own)?);
    }

    Ok(Partition {
        bundle: DatasetBundle::from_datasets(datasets),
        full_truth,
    })
}

/// Behaviour of a simulated teacher.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorProfile {
    /// Probability that a true object is detected.
    pub recall_rate: f64,
    /// Expected false positives per image for each target class.
    pub fp_per_image: f64,
    /// Beta parameters of true-positive scores.
    pub tp_score: (f64, f64),
    /// Beta parameters of false-positive scores.
    pub fp_score: (f64, f64),
    /// Maximum shift of each box coordinate, in pixels.
    pub localization_jitter: f64,
}

impl Default for DetectorProfile {
    fn default() -> Self {
        Self {
            recall_rate: 0.8,
            fp_per_image: 0.3,
            tp_score: (5.0, 2.0),
            fp_score: (2.0, 5.0),
            localization_jitter: 2.0,
        }
    }
}

impl DetectorProfile {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.recall_rate) {
            return Err(Error::OutOfUnitInterval {
                name: "recall_rate",
                value: self.recall_rate,
            });
        }
        if !(self.fp_per_image >= 0.0 && self.fp_per_image.is_finite()) {
            return Err(invalid(format!(
                "fp_per_image must be >= 0, got {}",
                self.fp_per_image
            )));
        }
        for (a, b) in [self.tp_score, self.fp_score] {
            if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
                return Err(invalid(format!(
                    "beta parameters must be positive, got ({a}, {b})"
                )));
            }
        }
        if self.localization_jitter.is_nan() || self.localization_jitter < 0.0 {
            return Err(invalid("localization_jitter must be >= 0".into()));
        }
        Ok(())
    }
}

fn beta_dist(params: (f64, f64)) -> Result<Beta<f64>> {
    Beta::new(params.0, params.1).map_err(|e| invalid(format!("beta{params:?}: {e}")))
}

fn jittered(rng: &mut ChaCha8Rng, b: &BBox, jitter: f64) -> Result<BBox> {
    if jitter == 0.0 {
        return Ok(*b);
    }
    let mut shift = || rng.random_range(-jitter..=jitter);
    let (dx, dy, dw, dh) = (shift(), shift(), shift(), shift());
    BBox::new(
        b.x() + dx,
        b.y() + dy,
        (b.w() + dw).max(b.w() * 0.5),
        (b.h() + dh).max(b.h() * 0.5),
    )
}

/// Teacher predictions for `target_classes` on the images of `full_truth`.
///
/// Each object of a target class is found with probability `recall_rate`
/// and scored from the TP Beta distribution; false positives arrive at
/// `fp_per_image` per class per image, uniformly placed, with classes drawn
/// uniformly from the targets and scores from the FP Beta distribution.
pub fn simulate_detector(
    full_truth: &Dataset,
    target_classes: &BTreeSet<ClassId>,
    profile: &DetectorProfile,
    seed: u64,
) -> Result<Vec<DetectionRecord>> {
    profile.validate()?;
    let tp_score = beta_dist(profile.tp_score)?;
    let fp_score = beta_dist(profile.fp_score)?;
    let targets: Vec<ClassId> = target_classes.iter().copied().collect();

    let mut by_image: BTreeMap<ImageId, Vec<&GroundTruthLabel>> = BTreeMap::new();
    for l in full_truth.labels() {
        if l.source.is_object() && target_classes.contains(&l.class_id) {
            by_image.entry(l.image_id).or_default().push(l);
        }
    }

    let mut out = Vec::new();
    for image in full_truth.images() {
        let mut rng = stream(seed, image.id.0);
        for gt in by_image.get(&image.id).map(Vec::as_slice).unwrap_or(&[]) {
            if rng.random_bool(profile.recall_rate) {
                let bbox = jittered(&mut rng, &gt.bbox, profile.localization_jitter)?;
                let score = tp_score.sample(&mut rng).clamp(0.0, 1.0);
                out.push(DetectionRecord::new(image.id, gt.class_id, bbox, score)?);
            }
        }
        if targets.is_empty() {
            continue;
        }
        let (w, h) = (image.width as f64, image.height as f64);
        for _ in 0..poisson(&mut rng, profile.fp_per_image * targets.len() as f64)? {
            let class = targets[rng.random_range(0..targets.len())];
            let bw = rng.random_range(0.05..=0.3) * w;
            let bh = rng.random_range(0.05..=0.3) * h;
            let bbox = BBox::new(
                rng.random_range(0.0..=w - bw),
                rng.random_range(0.0..=h - bh),
                bw,
                bh,
            )?;
            let score = fp_score.sample(&mut rng).clamp(0.0, 1.0);
            out.push(DetectionRecord::new(image.id, class, bbox, score)?);
        }
    }
    Ok(out)
}

/// Expected precision and recall of one class of a simulated teacher as a
/// function of the threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticPr {
    pub profile: DetectorProfile,
    /// Mean number of objects of the class per image.
    pub n_gt_per_image: f64,
}

impl AnalyticPr {
    pub fn recall(&self, tau: f64) -> f64 {
        let (a, b) = self.profile.tp_score;
        self.profile.recall_rate * beta_survival(a, b, tau)
    }

    /// Ratio of expected TP to expected detections; 1 when no detection is
    /// expected.
    pub fn precision(&self, tau: f64) -> f64 {
        let (a, b) = self.profile.tp_score;
        let (c, d) = self.profile.fp_score;
        let tp = self.profile.recall_rate * self.n_gt_per_image * beta_survival(a, b, tau);
        let fp = self.profile.fp_per_image * beta_survival(c, d, tau);
        if tp + fp == 0.0 {
            1.0
        } else {
            tp / (tp + fp)
        }
    }

    /// `(tau, precision, recall)` at each threshold.
    pub fn tabulate(&self, taus: &[f64]) -> Vec<(f64, f64, f64)> {
        taus.iter()
            .map(|&t| (t, self.precision(t), self.recall(t)))
            .collect()
    }
}

pub fn analytic_pr(profile: &DetectorProfile, n_gt_per_image: f64) -> Result<AnalyticPr> {
    profile.validate()?;
    if !(n_gt_per_image >= 0.0 && n_gt_per_image.is_finite()) {
        return Err(invalid(format!(
            "n_gt_per_image must be >= 0, got {n_gt_per_image}"
        )));
    }
    Ok(AnalyticPr {
        profile: profile.clone(),
        n_gt_per_image,
    })
}
