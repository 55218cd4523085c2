//! Threshold selection on the precision/recall curve of all labels: the
//! human-labeled fraction `x` of a class plus its pseudo labels.
//!
//! Human labels are taken as correct with confidence 1. With `t` objects of
//! which `x·t` are labeled and pseudo labels of precision `p` and recall `r`
//! on the unlabeled remainder:
//!
//! ```text
//! p_all = (x + (1-x)·r) / (x + (1-x)·r/p)      r_all = x + (1-x)·r
//! ```
//!
//! and at threshold 1 (no pseudo labels) the point is `(1, x)`. Internally
//! everything is evaluated from counts, scaling by the validation curve's
//! `n_gt`, which avoids the division by `p`.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{ClassId, DatasetBundle, LabelRatio, LabelRatioTable, RatioMode};
use crate::threshold::{
    argmax_desc, f_beta_mass, thresholds_from, Beta, BetaSettings, Fmax, Method, PrCurve,
    Selection, ThresholdPolicy,
};

/// Image-count estimate of `x_j`: images of the datasets annotating `class`
/// over all images of the bundle.
pub fn estimate_label_ratio(bundle: &DatasetBundle, class: ClassId) -> Result<LabelRatio> {
    if !bundle.full_class_set.contains(&class) {
        return Err(Error::ClassNotInBundle(class));
    }
    let total = bundle.total_images();
    if total == 0 {
        return Err(Error::EmptyBundle);
    }
    let labeled: usize = bundle
        .datasets
        .iter()
        .filter(|d| d.annotates(class))
        .map(|d| d.images().len())
        .sum();
    LabelRatio::new(labeled as f64 / total as f64, RatioMode::ImageCountEstimate)
}

/// [`estimate_label_ratio`] for every class of the bundle.
pub fn estimate_label_ratios(bundle: &DatasetBundle) -> Result<LabelRatioTable> {
    bundle
        .full_class_set
        .iter()
        .map(|&c| Ok((c, estimate_label_ratio(bundle, c)?)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CombinedPoint {
    pub threshold: f64,
    pub p_ds: f64,
    pub r_ds: f64,
}

fn check_unit(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::OutOfUnitInterval { name, value })
    }
}

/// Precision and recall of all labels from the pseudo-label precision `p`
/// and recall `r`.
///
/// When `p = r = 0` the number of pseudo labels cannot be recovered from the
/// ratios; it is taken as zero. Use [`combined_point_counts`] when counts are
/// at hand.
pub fn combined_point(p: f64, r: f64, x: f64, at_tau_one: bool) -> Result<(f64, f64)> {
    check_unit("precision", p)?;
    check_unit("recall", r)?;
    check_unit("x", x)?;
    if at_tau_one {
        return Ok((1.0, x));
    }
    if p == 0.0 && r > 0.0 {
        return Err(Error::ZeroPrecisionWithRecall(r));
    }
    let correct = x + (1.0 - x) * r;
    let emitted = if r == 0.0 { x } else { x + (1.0 - x) * r / p };
    let p_ds = if emitted == 0.0 {
        0.0
    } else {
        correct / emitted
    };
    Ok((p_ds, correct))
}

/// Label masses for `tp`/`fp` pseudo labels against `n_gt` unlabeled
/// validation objects, scaled so the whole class weighs `n_gt`.
struct Masses {
    correct: f64,
    emitted: f64,
    truth: f64,
}

fn masses(tp: u64, fp: u64, n_gt: u64, x: f64) -> Masses {
    let g = n_gt as f64;
    let labeled = x * g;
    let pseudo_share = 1.0 - x;
    Masses {
        correct: labeled + pseudo_share * tp as f64,
        emitted: labeled + pseudo_share * (tp + fp) as f64,
        truth: g,
    }
}

/// Count form of [`combined_point`]; defined whenever `n_gt > 0`.
pub fn combined_point_counts(tp: u64, fp: u64, n_gt: u64, x: f64) -> Result<(f64, f64)> {
    check_unit("x", x)?;
    if n_gt == 0 {
        return Err(Error::InvalidConfig("combined point needs n_gt > 0".into()));
    }
    if tp > n_gt {
        return Err(Error::TruePositivesExceedGroundTruth {
            class: ClassId(0),
            tp,
            n_gt,
        });
    }
    let m = masses(tp, fp, n_gt, x);
    let p_ds = if m.emitted == 0.0 {
        1.0
    } else {
        m.correct / m.emitted
    };
    let r_ds = x + (1.0 - x) * (tp as f64 / n_gt as f64);
    Ok((p_ds, r_ds))
}

/// The curve of all labels: the `(1, 1, x)` anchor followed by every
/// pseudo-label point below threshold 1, descending.
///
/// A curve with `n_gt = 0` carries no information about how pseudo labels
/// compare with the human-labeled mass, so only the anchor is returned.
pub fn combined_curve(curve: &PrCurve, x: f64) -> Result<Vec<CombinedPoint>> {
    check_unit("x", x)?;
    let mut out = Vec::with_capacity(curve.points().len() + 1);
    out.push(CombinedPoint {
        threshold: 1.0,
        p_ds: 1.0,
        r_ds: x,
    });
    if curve.n_gt == 0 {
        return Ok(out);
    }
    for p in curve.points().iter().filter(|p| p.threshold < 1.0) {
        let (p_ds, r_ds) = combined_point_counts(p.tp_cum, p.fp_cum, curve.n_gt, x)?;
        out.push(CombinedPoint {
            threshold: p.threshold,
            p_ds,
            r_ds,
        });
    }
    Ok(out)
}

/// F-beta maximization over the all-labels curve. The threshold-1 anchor
/// competes, so a class whose pseudo labels never help gets threshold 1.
pub fn fmax_combined(curve: &PrCurve, x: f64, beta: Beta) -> Fmax {
    let anchor = if curve.n_gt == 0 {
        f_beta_mass(x, x, 1.0, beta)
    } else {
        let m = masses(0, 0, curve.n_gt, x);
        f_beta_mass(m.correct, m.emitted, m.truth, beta)
    };
    let points = curve
        .points()
        .iter()
        .filter(|p| curve.n_gt > 0 && p.threshold < 1.0)
        .map(|p| {
            let m = masses(p.tp_cum, p.fp_cum, curve.n_gt, x);
            (
                p.threshold,
                f_beta_mass(m.correct, m.emitted, m.truth, beta),
            )
        });
    argmax_desc(core::iter::once((1.0, anchor)).chain(points))
}

/// Same selection rules as [`crate::threshold::select_policy`], run on the
/// all-labels curves.
pub fn select_policy_ds(
    curves: &BTreeMap<ClassId, PrCurve>,
    ratios: &LabelRatioTable,
    betas: BetaSettings,
) -> Result<Selection> {
    let mut policy = ThresholdPolicy::new(Method::FmaxDs, Some(betas));
    let mut empty_curves = Vec::new();
    for (&class, curve) in curves {
        let x = ratios.get(&class).ok_or(Error::MissingRatio(class))?.x();
        if curve.is_empty() {
            empty_curves.push(class);
        }
        policy.insert(
            class,
            thresholds_from(betas, |b| fmax_combined(curve, x, b)),
        )?;
    }
    Ok(Selection {
        policy,
        empty_curves,
    })
}

/// Global variant: pooled curve, class-averaged `x`.
pub fn select_policy_ds_global(
    curves: &BTreeMap<ClassId, PrCurve>,
    ratios: &LabelRatioTable,
    betas: BetaSettings,
) -> Result<Selection> {
    let mut xs = Vec::with_capacity(curves.len());
    for class in curves.keys() {
        xs.push(ratios.get(class).ok_or(Error::MissingRatio(*class))?.x());
    }
    let x = if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    };
    let pooled = PrCurve::pooled(ClassId(0), curves.values());
    let thresholds = thresholds_from(betas, |b| fmax_combined(&pooled, x, b));
    let mut policy = ThresholdPolicy::uniform(Method::FmaxDs, curves.keys().copied(), thresholds)?;
    policy.betas = Some(betas);
    let empty_curves = if pooled.is_empty() {
        curves.keys().copied().collect()
    } else {
        Vec::new()
    };
    Ok(Selection {
        policy,
        empty_curves,
    })
}
