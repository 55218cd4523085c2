use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use pltune_core::combined::{combined_point, fmax_combined, select_policy_ds};
use pltune_core::harness::{average_precision_50, evaluate_pseudo_quality};
use pltune_core::matching::{iou, MatchRecord};
use pltune_core::model::{LabelRatio, RatioMode};
use pltune_core::pseudo::{generate, merge_bundle, GenerateOptions};
use pltune_core::synth::{generate_world, partition_classes, WorldConfig};
use pltune_core::threshold::{
    fmax, pr_curve, select_policy, Beta, BetaSettings, Method, PrCurve, SelectionMode,
    ThresholdPolicy, Thresholds,
};
use pltune_core::{
    BBox, ClassId, Dataset, DatasetBundle, DetectionRecord, GroundTruthLabel, Image, ImageId,
    LabelSource,
};

/// `(score, is_tp)` pairs with scores on a coarse grid so ties are common.
fn records_strategy() -> impl Strategy<Value = (Vec<(f64, bool)>, u64)> {
    (
        prop::collection::vec(
            ((0u32..=20).prop_map(|k| k as f64 / 20.0), any::<bool>()),
            0..120,
        ),
        0u64..30,
    )
}

fn match_records(raw: &[(f64, bool)]) -> Vec<MatchRecord> {
    raw.iter()
        .enumerate()
        .map(|(i, &(score, tp))| MatchRecord {
            class_id: ClassId(3),
            image_id: ImageId(1 + i as u64 % 7),
            score,
            matched_gt: tp.then_some(i as u64),
        })
        .collect()
}

fn curve_of(raw: &[(f64, bool)], extra_gt: u64) -> PrCurve {
    let n_gt = raw.iter().filter(|r| r.1).count() as u64 + extra_gt;
    pr_curve(ClassId(3), &match_records(raw), n_gt).unwrap()
}

/// F-beta as the exact fraction `num / den` for beta^2 = `b2_num / b2_den`.
fn f_fraction(tp: u64, fp: u64, n_gt: u64, b2_num: u128, b2_den: u128) -> (u128, u128) {
    let (tp, fp, n) = (tp as u128, fp as u128, n_gt as u128);
    ((b2_den + b2_num) * tp, b2_num * n + b2_den * (tp + fp))
}

/// Exhaustive threshold search with exact rational comparison.
fn brute_force_threshold(raw: &[(f64, bool)], n_gt: u64, b2: (u128, u128)) -> f64 {
    let mut scores: Vec<f64> = raw.iter().map(|r| r.0).filter(|&s| s < 1.0).collect();
    scores.sort_by(|a, b| b.total_cmp(a));
    scores.dedup();
    let mut best: Option<(f64, (u128, u128))> = None;
    for s in scores {
        let tp = raw.iter().filter(|r| r.1 && r.0 >= s).count() as u64;
        let fp = raw.iter().filter(|r| !r.1 && r.0 >= s).count() as u64;
        let f = f_fraction(tp, fp, n_gt, b2.0, b2.1);
        let better = match best {
            None => true,
            Some((_, g)) => f.0 * g.1 > g.0 * f.1,
        };
        if better {
            best = Some((s, f));
        }
    }
    match best {
        Some((s, f)) if f.0 > 0 => s,
        _ => 1.0,
    }
}

fn betas() -> [(Beta, (u128, u128)); 3] {
    [
        (Beta::HALF, (1, 4)),
        (Beta::ONE, (1, 1)),
        (Beta::TWO, (4, 1)),
    ]
}

fn curves_strategy() -> impl Strategy<Value = BTreeMap<ClassId, PrCurve>> {
    prop::collection::vec(records_strategy(), 1..6).prop_map(|sets| {
        sets.iter()
            .enumerate()
            .map(|(c, (raw, extra))| {
                let n_gt = raw.iter().filter(|r| r.1).count() as u64 + extra;
                let recs: Vec<MatchRecord> = match_records(raw)
                    .into_iter()
                    .map(|r| MatchRecord {
                        class_id: ClassId(c as u32),
                        ..r
                    })
                    .collect();
                (
                    ClassId(c as u32),
                    pr_curve(ClassId(c as u32), &recs, n_gt).unwrap(),
                )
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn fmax_matches_exhaustive_search((raw, extra) in records_strategy()) {
        let curve = curve_of(&raw, extra);
        for (beta, b2) in betas() {
            let expected = brute_force_threshold(&raw, curve.n_gt, b2);
            prop_assert_eq!(fmax(&curve, beta).threshold, expected);
        }
    }

    #[test]
    fn pr_curve_counts_are_cumulative((raw, extra) in records_strategy()) {
        let curve = curve_of(&raw, extra);
        for p in curve.points() {
            let tp = raw.iter().filter(|r| r.1 && r.0 >= p.threshold).count() as u64;
            let fp = raw.iter().filter(|r| !r.1 && r.0 >= p.threshold).count() as u64;
            prop_assert_eq!((p.tp_cum, p.fp_cum), (tp, fp));
        }
        let ts: Vec<f64> = curve.points().iter().map(|p| p.threshold).collect();
        prop_assert!(ts.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn union_counts_match_combined_point(
        unlabeled in 1u64..60,
        labeled in 0u64..60,
        tp_frac in 0.0f64..=1.0,
        fp in 0u64..40,
    ) {
        let tp = (tp_frac * unlabeled as f64).floor() as u64;
        // the ratio form cannot see false positives when nothing is correct
        prop_assume!(tp > 0);
        let total = unlabeled + labeled;
        let x = labeled as f64 / total as f64;
        let p = tp as f64 / (tp + fp) as f64;
        let r = tp as f64 / unlabeled as f64;

        // union label set: human labels, then pseudo labels (true or false)
        let mut union: Vec<bool> = vec![true; labeled as usize];
        union.extend(std::iter::repeat_n(true, tp as usize));
        union.extend(std::iter::repeat_n(false, fp as usize));
        let correct = union.iter().filter(|&&c| c).count() as f64;
        let expected = (correct / union.len() as f64, correct / total as f64);

        let (p_ds, r_ds) = combined_point(p, r, x, false).unwrap();
        prop_assert!((p_ds - expected.0).abs() < 1e-9);
        prop_assert!((r_ds - expected.1).abs() < 1e-9);
        prop_assert_eq!(combined_point(p, r, x, true).unwrap(), (1.0, x));
    }

    #[test]
    fn zero_label_ratio_reduces_to_pseudo_label_f(curves in curves_strategy()) {
        let ratios = curves.keys().map(|&c| (c, LabelRatio::new(0.0, RatioMode::Exact).unwrap())).collect();
        for mode in [SelectionMode::Single, SelectionMode::Dual] {
            let betas = BetaSettings::standard(mode);
            let pl = select_policy(&curves, betas).unwrap();
            let ds = select_policy_ds(&curves, &ratios, betas).unwrap();
            prop_assert_eq!(pl.policy.entries(), ds.policy.entries());
        }
        for curve in curves.values() {
            for (beta, _) in betas() {
                prop_assert_eq!(fmax_combined(curve, 0.0, beta), fmax(curve, beta));
            }
        }
    }

    #[test]
    fn full_label_ratio_selects_one(curves in curves_strategy()) {
        for curve in curves.values() {
            for (beta, _) in betas() {
                prop_assert_eq!(fmax_combined(curve, 1.0, beta).threshold, 1.0);
            }
        }
    }

    #[test]
    fn dual_policies_are_ordered(curves in curves_strategy(), x in 0.0f64..=1.0) {
        let betas = BetaSettings::standard(SelectionMode::Dual);
        let ratios = curves.keys().map(|&c| (c, LabelRatio::new(x, RatioMode::Exact).unwrap())).collect();
        let pl = select_policy(&curves, betas).unwrap().policy;
        let ds = select_policy_ds(&curves, &ratios, betas).unwrap().policy;
        for t in pl.entries().values().chain(ds.entries().values()) {
            let dual = matches!(t, Thresholds::Dual { .. });
            prop_assert!(dual);
            prop_assert!(t.high() >= t.low());
        }
    }

    #[test]
    fn iou_is_symmetric_and_bounded(
        a in (0.0f64..50.0, 0.0f64..50.0, 0.1f64..30.0, 0.1f64..30.0),
        b in (0.0f64..50.0, 0.0f64..50.0, 0.1f64..30.0, 0.1f64..30.0),
    ) {
        let a = BBox::new(a.0, a.1, a.2, a.3).unwrap();
        let b = BBox::new(b.0, b.1, b.2, b.3).unwrap();
        let v = iou(&a, &b);
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert_eq!(v, iou(&b, &a));
        prop_assert!((iou(&a, &a) - 1.0).abs() < 1e-12);
    }
}

/// Two-dataset fixture: dataset 0 labels class 0, dataset 1 labels class 1,
/// and each gets detections for the other class.
struct Fixture {
    bundle: DatasetBundle,
    detections: Vec<Vec<DetectionRecord>>,
}

fn fixture(scores: &[f64]) -> Fixture {
    let mk = |own: u32| {
        let images = (1..=4)
            .map(|i| Image {
                id: ImageId(i),
                width: 100,
                height: 100,
                file_name: format!("{i}.jpg"),
            })
            .collect();
        let labels = (1..=4)
            .map(|i| {
                GroundTruthLabel::human(
                    i,
                    ImageId(i),
                    ClassId(own),
                    BBox::new(10.0, 10.0, 20.0, 20.0).unwrap(),
                )
            })
            .collect();
        Dataset::new(images, labels, [(ClassId(own), format!("c{own}"))].into()).unwrap()
    };
    let dets = |other: u32| {
        scores
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                DetectionRecord::new(
                    ImageId(1 + i as u64 % 4),
                    ClassId(other),
                    BBox::new(i as f64, 50.0, 10.0, 10.0).unwrap(),
                    s,
                )
                .unwrap()
            })
            .collect()
    };
    Fixture {
        bundle: DatasetBundle::from_datasets(vec![mk(0), mk(1)]),
        detections: vec![dets(1), dets(0)],
    }
}

fn policy(t: Thresholds) -> ThresholdPolicy {
    ThresholdPolicy::uniform(Method::Manual, [ClassId(0), ClassId(1)], t).unwrap()
}

proptest! {
    #[test]
    fn raising_tau_never_adds_pseudo_labels(
        scores in prop::collection::vec(0.0f64..=1.0, 0..30),
        lo in 0.0f64..=1.0,
        hi in 0.0f64..=1.0,
    ) {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        let f = fixture(&scores);
        let opts = GenerateOptions::default();
        let ds = &f.bundle.datasets[0];
        let count = |tau| generate(&f.detections[0], &policy(Thresholds::Single { tau }), ds, &opts)
            .unwrap()
            .count(LabelSource::Pseudo);
        prop_assert!(count(hi) <= count(lo));
        let set = generate(&f.detections[0], &policy(Thresholds::Single { tau: lo }), ds, &opts).unwrap();
        prop_assert_eq!(&set, &generate(&f.detections[0], &policy(Thresholds::Single { tau: lo }), ds, &opts).unwrap());
        for l in &set.labels {
            prop_assert!(l.score >= lo);
        }
        let equal = Thresholds::Dual { tau_h: hi, tau_l: hi };
        let dual = generate(&f.detections[0], &policy(equal), ds, &opts).unwrap();
        prop_assert_eq!(dual.count(LabelSource::Ignore), 0);
    }

    #[test]
    fn tau_one_merge_is_plain_concatenation(scores in prop::collection::vec(0.0f64..=1.0, 0..30)) {
        let f = fixture(&scores);
        for t in [Thresholds::Single { tau: 1.0 }, Thresholds::Dual { tau_h: 1.0, tau_l: 1.0 }] {
            let sets = (0..2)
                .map(|i| (i, generate(&f.detections[i], &policy(t), &f.bundle.datasets[i], &GenerateOptions::default()).unwrap()))
                .collect();
            prop_assert_eq!(merge_bundle(&f.bundle, &sets).unwrap(), merge_bundle(&f.bundle, &BTreeMap::new()).unwrap());
        }
    }
}

#[test]
fn ap_is_invariant_to_duplicating_the_world() {
    let world = generate_world(&WorldConfig {
        n_images: 60,
        n_classes: 3,
        seed: 2,
        ..Default::default()
    })
    .unwrap();
    let profile = pltune_core::synth::DetectorProfile {
        fp_per_image: 0.5,
        ..Default::default()
    };
    let dets =
        pltune_core::synth::simulate_detector(&world, &world.class_set(), &profile, 9).unwrap();

    // second copy: image ids shifted past the first
    let shift = 1_000;
    let (images, labels, cats) = world.clone().into_parts();
    let mut all_images = images.clone();
    all_images.extend(images.iter().map(|im| Image {
        id: ImageId(im.id.0 + shift),
        ..im.clone()
    }));
    let mut all_labels = labels.clone();
    all_labels.extend(labels.iter().map(|l| GroundTruthLabel {
        id: l.id + shift * 100,
        image_id: ImageId(l.image_id.0 + shift),
        ..l.clone()
    }));
    let doubled = Dataset::new(all_images, all_labels, cats).unwrap();
    let mut all_dets = dets.clone();
    all_dets.extend(dets.iter().map(|d| {
        DetectionRecord::new(ImageId(d.image_id.0 + shift), d.class_id, d.bbox, d.score()).unwrap()
    }));

    for c in world.class_set() {
        let once = average_precision_50(&dets, &world, c).unwrap().unwrap();
        let twice = average_precision_50(&all_dets, &doubled, c)
            .unwrap()
            .unwrap();
        assert!((once - twice).abs() < 1e-12, "class {c}: {once} vs {twice}");
    }
}

#[test]
fn partition_preserves_own_class_annotations() {
    let world = generate_world(&WorldConfig {
        n_images: 300,
        n_classes: 6,
        seed: 5,
        ..Default::default()
    })
    .unwrap();
    for n in [2, 3] {
        let p = partition_classes(&world, n, 1).unwrap();
        let union: BTreeSet<ClassId> = p
            .bundle
            .datasets
            .iter()
            .flat_map(|d| d.class_set())
            .collect();
        assert_eq!(union, world.class_set());
        let mut seen = BTreeSet::new();
        for (i, ds) in p.bundle.datasets.iter().enumerate() {
            for im in ds.images() {
                assert!(seen.insert(im.id), "image {} in two splits", im.id);
            }
            for l in world
                .labels()
                .iter()
                .filter(|l| ds.contains_image(l.image_id))
            {
                assert_eq!(ds.labels().contains(l), l.class_id.0 as usize % n == i);
            }
        }
    }
}

#[test]
fn pseudo_quality_of_perfect_teacher_is_one() {
    let world = generate_world(&WorldConfig {
        n_images: 80,
        n_classes: 4,
        seed: 8,
        ..Default::default()
    })
    .unwrap();
    let p = partition_classes(&world, 2, 3).unwrap();
    let perfect = pltune_core::synth::DetectorProfile {
        recall_rate: 1.0,
        fp_per_image: 0.0,
        localization_jitter: 0.0,
        ..Default::default()
    };
    for (i, ds) in p.bundle.datasets.iter().enumerate() {
        let missing = p.bundle.complement(i).unwrap();
        let dets =
            pltune_core::synth::simulate_detector(&p.full_truth[i], &missing, &perfect, 4).unwrap();
        let pol = ThresholdPolicy::uniform(
            Method::Manual,
            missing.iter().copied(),
            Thresholds::Single { tau: 0.0 },
        )
        .unwrap();
        let set = generate(&dets, &pol, ds, &GenerateOptions::default()).unwrap();
        let q = evaluate_pseudo_quality(&set, &p.full_truth[i]).unwrap();
        assert_eq!((q.precision(), q.recall()), (1.0, 1.0));
    }
}
