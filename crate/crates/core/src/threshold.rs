//! Precision/recall curves of pseudo labels and F-beta threshold selection.
//!
//! A curve has one point per distinct confidence score. F-beta over
//! thresholds is a step function that only changes at those scores, so
//! scanning them maximizes it exactly.
//!
//! A threshold of 1 means "no pseudo labels for this class": [`Thresholds::keeps`]
//! rejects every score when `tau >= 1`. Candidate thresholds are therefore
//! the observed scores below 1, and a class whose best F-beta is zero (or
//! whose curve is empty) resolves to 1.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::matching::MatchRecord;
use crate::model::ClassId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub threshold: f64,
    pub tp_cum: u64,
    pub fp_cum: u64,
    pub precision: f64,
    pub recall: f64,
}

/// Cumulative statistics of pseudo labels, ordered by descending threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    pub class_id: ClassId,
    pub n_gt: u64,
    points: Vec<PrPoint>,
}

fn point(threshold: f64, tp_cum: u64, fp_cum: u64, n_gt: u64) -> PrPoint {
    PrPoint {
        threshold,
        tp_cum,
        fp_cum,
        precision: tp_cum as f64 / (tp_cum + fp_cum) as f64,
        recall: if n_gt == 0 {
            0.0
        } else {
            tp_cum as f64 / n_gt as f64
        },
    }
}

impl PrCurve {
    pub fn points(&self) -> &[PrPoint] {
        &self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Builds a curve from `(threshold, tp_cum, fp_cum)` steps, checking the
    /// ordering and counting invariants.
    pub fn from_steps(class_id: ClassId, n_gt: u64, steps: &[(f64, u64, u64)]) -> Result<Self> {
        let mut points = Vec::with_capacity(steps.len());
        let mut prev: Option<(f64, u64, u64)> = None;
        for &(threshold, tp, fp) in steps {
            if !(0.0..=1.0).contains(&threshold) {
                return Err(Error::ScoreOutOfRange(threshold));
            }
            if let Some((pt, ptp, pfp)) = prev {
                if threshold >= pt || tp < ptp || fp < pfp || tp + fp <= ptp + pfp {
                    return Err(Error::InvalidConfig(alloc::format!(
                        "curve steps must have strictly decreasing thresholds and growing counts (at threshold {threshold})"
                    )));
                }
            } else if tp + fp == 0 {
                return Err(Error::InvalidConfig("curve point with no records".into()));
            }
            if tp > n_gt {
                return Err(Error::TruePositivesExceedGroundTruth {
                    class: class_id,
                    tp,
                    n_gt,
                });
            }
            points.push(point(threshold, tp, fp, n_gt));
            prev = Some((threshold, tp, fp));
        }
        Ok(Self {
            class_id,
            n_gt,
            points,
        })
    }

    /// Sums several curves into one: at every threshold the pooled counts
    /// are the sums of each curve's counts at that threshold.
    pub fn pooled<'a>(class_id: ClassId, curves: impl IntoIterator<Item = &'a PrCurve>) -> Self {
        let mut deltas: Vec<(f64, u64, u64)> = Vec::new();
        let mut n_gt = 0;
        for c in curves {
            n_gt += c.n_gt;
            let (mut tp, mut fp) = (0, 0);
            for p in &c.points {
                deltas.push((p.threshold, p.tp_cum - tp, p.fp_cum - fp));
                tp = p.tp_cum;
                fp = p.fp_cum;
            }
        }
        deltas.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut points: Vec<PrPoint> = Vec::new();
        let (mut tp, mut fp) = (0, 0);
        for (t, dtp, dfp) in deltas {
            tp += dtp;
            fp += dfp;
            match points.last_mut() {
                Some(last) if last.threshold == t => *last = point(t, tp, fp, n_gt),
                _ => points.push(point(t, tp, fp, n_gt)),
            }
        }
        Self {
            class_id,
            n_gt,
            points,
        }
    }
}

/// One point per distinct score; counts cover every record scoring at least
/// that threshold.
pub fn pr_curve(class_id: ClassId, records: &[MatchRecord], n_gt: u64) -> Result<PrCurve> {
    let mut sorted: Vec<(f64, bool)> = Vec::with_capacity(records.len());
    for r in records {
        if r.class_id != class_id {
            return Err(Error::MixedClasses {
                expected: class_id,
                found: r.class_id,
            });
        }
        sorted.push((r.score, r.is_tp()));
    }
    let tp_total = sorted.iter().filter(|(_, tp)| *tp).count() as u64;
    if tp_total > n_gt {
        return Err(Error::TruePositivesExceedGroundTruth {
            class: class_id,
            tp: tp_total,
            n_gt,
        });
    }
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut points: Vec<PrPoint> = Vec::new();
    let (mut tp, mut fp) = (0u64, 0u64);
    for (i, &(score, is_tp)) in sorted.iter().enumerate() {
        if is_tp {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_score = sorted.get(i + 1).is_none_or(|next| next.0 != score);
        if last_of_score {
            points.push(point(score, tp, fp, n_gt));
        }
    }
    Ok(PrCurve {
        class_id,
        n_gt,
        points,
    })
}

/// The `beta` of an F-beta score; always positive and finite.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Beta(f64);

impl Beta {
    /// F1, the single-threshold criterion.
    pub const ONE: Beta = Beta(1.0);
    /// F0.5, precision weighted; picks the high threshold.
    pub const HALF: Beta = Beta(0.5);
    /// F2, recall weighted; picks the low threshold.
    pub const TWO: Beta = Beta(2.0);

    pub fn new(beta: f64) -> Result<Self> {
        if beta.is_finite() && beta > 0.0 {
            Ok(Beta(beta))
        } else {
            Err(Error::InvalidBeta(beta))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for Beta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Weighted harmonic mean of precision and recall; 0 when both are 0.
pub fn f_beta(precision: f64, recall: f64, beta: Beta) -> f64 {
    if precision == 0.0 && recall == 0.0 {
        return 0.0;
    }
    let b2 = beta.0 * beta.0;
    (1.0 + b2) * precision * recall / (b2 * precision + recall)
}

/// F-beta from label masses: `correct` of `emitted` labels are right and
/// `truth` objects exist. Equal to `f_beta(correct/emitted, correct/truth)`.
pub(crate) fn f_beta_mass(correct: f64, emitted: f64, truth: f64, beta: Beta) -> f64 {
    if correct <= 0.0 {
        return 0.0;
    }
    let b2 = beta.0 * beta.0;
    (1.0 + b2) * correct / (b2 * truth + emitted)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fmax {
    pub threshold: f64,
    pub fscore: f64,
}

impl Fmax {
    pub const NO_PSEUDO_LABELS: Fmax = Fmax {
        threshold: 1.0,
        fscore: 0.0,
    };
}

/// Argmax over `(threshold, fscore)` candidates given in descending
/// threshold order; ties keep the earlier (higher) threshold. A best score of
/// zero maps to [`Fmax::NO_PSEUDO_LABELS`].
pub(crate) fn argmax_desc(candidates: impl IntoIterator<Item = (f64, f64)>) -> Fmax {
    let mut best: Option<(f64, f64)> = None;
    for (t, f) in candidates {
        if best.is_none_or(|(_, bf)| f > bf) {
            best = Some((t, f));
        }
    }
    match best {
        Some((threshold, fscore)) if fscore > 0.0 => Fmax { threshold, fscore },
        _ => Fmax::NO_PSEUDO_LABELS,
    }
}

/// Threshold maximizing F-beta of the pseudo labels, ties toward the higher
/// threshold.
pub fn fmax(curve: &PrCurve, beta: Beta) -> Fmax {
    let n_gt = curve.n_gt as f64;
    argmax_desc(curve.points.iter().filter(|p| p.threshold < 1.0).map(|p| {
        let f = f_beta_mass(p.tp_cum as f64, (p.tp_cum + p.fp_cum) as f64, n_gt, beta);
        (p.threshold, f)
    }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Thresholds {
    Single { tau: f64 },
    Dual { tau_h: f64, tau_l: f64 },
}

impl Thresholds {
    /// Pseudo-label threshold (`tau` or `tau_h`).
    pub fn high(&self) -> f64 {
        match *self {
            Thresholds::Single { tau } => tau,
            Thresholds::Dual { tau_h, .. } => tau_h,
        }
    }

    /// Below this score a region is background (`tau` or `tau_l`).
    pub fn low(&self) -> f64 {
        match *self {
            Thresholds::Single { tau } => tau,
            Thresholds::Dual { tau_l, .. } => tau_l,
        }
    }

    /// Whether a detection with `score` becomes a pseudo label.
    pub fn keeps(&self, score: f64) -> bool {
        passes(score, self.high())
    }

    /// Whether a detection with `score` falls in the ignore band.
    pub fn ignores(&self, score: f64) -> bool {
        matches!(self, Thresholds::Dual { .. }) && !self.keeps(score) && passes(score, self.low())
    }

    /// Values in [0, 1] and `tau_h >= tau_l`.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("tau_h", self.high()), ("tau_l", self.low())] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::OutOfUnitInterval { name, value: v });
            }
        }
        if self.high() < self.low() {
            return Err(Error::InvertedThresholds {
                tau_h: self.high(),
                tau_l: self.low(),
            });
        }
        Ok(())
    }
}

fn passes(score: f64, tau: f64) -> bool {
    tau < 1.0 && score >= tau
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    FmaxPl,
    FmaxDs,
    Grid,
    Manual,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::FmaxPl => "fmax_pl",
            Method::FmaxDs => "fmax_ds",
            Method::Grid => "grid",
            Method::Manual => "manual",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "fmax_pl" => Some(Method::FmaxPl),
            "fmax_ds" => Some(Method::FmaxDs),
            "grid" => Some(Method::Grid),
            "manual" => Some(Method::Manual),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMode {
    Single,
    Dual,
}

/// Which F-beta scores drive selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaSettings {
    Single(Beta),
    Dual { high: Beta, low: Beta },
}

impl BetaSettings {
    /// F1 for one threshold; F0.5 / F2 for the pair.
    pub fn standard(mode: SelectionMode) -> Self {
        match mode {
            SelectionMode::Single => BetaSettings::Single(Beta::ONE),
            SelectionMode::Dual => BetaSettings::Dual {
                high: Beta::HALF,
                low: Beta::TWO,
            },
        }
    }

    pub fn mode(&self) -> SelectionMode {
        match self {
            BetaSettings::Single(_) => SelectionMode::Single,
            BetaSettings::Dual { .. } => SelectionMode::Dual,
        }
    }
}

/// Per-class thresholds plus how they were chosen.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdPolicy {
    pub method: Method,
    pub betas: Option<BetaSettings>,
    entries: BTreeMap<ClassId, Thresholds>,
}

impl ThresholdPolicy {
    pub fn new(method: Method, betas: Option<BetaSettings>) -> Self {
        Self {
            method,
            betas,
            entries: BTreeMap::new(),
        }
    }

    /// The same thresholds for every class in `classes`.
    pub fn uniform(
        method: Method,
        classes: impl IntoIterator<Item = ClassId>,
        thresholds: Thresholds,
    ) -> Result<Self> {
        let mut policy = Self::new(method, None);
        for c in classes {
            policy.insert(c, thresholds)?;
        }
        Ok(policy)
    }

    /// Adds or replaces a class entry; rejects values outside [0, 1] and
    /// `tau_h < tau_l`.
    pub fn insert(&mut self, class: ClassId, thresholds: Thresholds) -> Result<()> {
        thresholds.validate()?;
        self.entries.insert(class, thresholds);
        Ok(())
    }

    pub fn get(&self, class: ClassId) -> Option<&Thresholds> {
        self.entries.get(&class)
    }

    pub fn entries(&self) -> &BTreeMap<ClassId, Thresholds> {
        &self.entries
    }

    /// Class-averaged `(high, low)` thresholds.
    pub fn mean_thresholds(&self) -> Option<(f64, f64)> {
        if self.entries.is_empty() {
            return None;
        }
        let n = self.entries.len() as f64;
        let high = self.entries.values().map(Thresholds::high).sum::<f64>() / n;
        let low = self.entries.values().map(Thresholds::low).sum::<f64>() / n;
        Some((high, low))
    }
}

/// A policy plus the classes that had no usable curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub policy: ThresholdPolicy,
    pub empty_curves: Vec<ClassId>,
}

pub(crate) fn thresholds_from(
    betas: BetaSettings,
    mut fmax_for: impl FnMut(Beta) -> Fmax,
) -> Thresholds {
    match betas {
        BetaSettings::Single(beta) => Thresholds::Single {
            tau: fmax_for(beta).threshold,
        },
        BetaSettings::Dual { high, low } => {
            let tau_h = fmax_for(high).threshold;
            let tau_l = fmax_for(low).threshold;
            Thresholds::Dual {
                tau_h,
                tau_l: if tau_l > tau_h { tau_h } else { tau_l },
            }
        }
    }
}

/// Per-class F-beta maximization on pseudo-label curves.
///
/// Single mode takes the F-beta argmax as `tau`. Dual mode takes `tau_h` from
/// the precision-weighted beta and `tau_l` from the recall-weighted one, and
/// raises `tau_l` to `tau_h` when it lands above it.
pub fn select_policy(
    curves: &BTreeMap<ClassId, PrCurve>,
    betas: BetaSettings,
) -> Result<Selection> {
    let mut policy = ThresholdPolicy::new(Method::FmaxPl, Some(betas));
    let mut empty_curves = Vec::new();
    for (&class, curve) in curves {
        if curve.is_empty() {
            empty_curves.push(class);
        }
        policy.insert(class, thresholds_from(betas, |b| fmax(curve, b)))?;
    }
    Ok(Selection {
        policy,
        empty_curves,
    })
}

/// One set of thresholds for all classes, chosen on the pooled curve.
pub fn select_policy_global(
    curves: &BTreeMap<ClassId, PrCurve>,
    betas: BetaSettings,
) -> Result<Selection> {
    let pooled = PrCurve::pooled(ClassId(0), curves.values());
    let thresholds = thresholds_from(betas, |b| fmax(&pooled, b));
    let mut policy = ThresholdPolicy::uniform(Method::FmaxPl, curves.keys().copied(), thresholds)?;
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
