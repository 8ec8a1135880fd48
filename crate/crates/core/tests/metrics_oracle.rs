mod common;

use std::f64::consts::PI;

use common::*;
use posebench::geometry::{Angle, BinAlignment};
use posebench::metrics::{
    evaluate, match_detections, ApInterpolation, EvalConfig, IouCriterion, IouRule, Metric, Outcome, PoseMode,
    GEODESIC_THRESHOLD,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const VIEWS: [u32; 4] = [4, 8, 16, 24];

fn config(mode: PoseMode, strict: bool, eleven: bool, offset: f64, alignment: BinAlignment) -> EvalConfig {
    EvalConfig {
        views: VIEWS.to_vec(),
        pose_mode: mode,
        metrics: [Metric::Ap, Metric::Avp, Metric::Aos, Metric::Avp3d].into_iter().collect(),
        iou: IouCriterion {
            threshold: 0.5,
            rule: if strict { IouRule::Strict } else { IouRule::Geq },
        },
        interpolation: if eleven {
            ApInterpolation::ElevenPoint
        } else {
            ApInterpolation::AllPoint
        },
        bin_offset: Angle::new(offset).unwrap(),
        bin_alignment: alignment,
        ..EvalConfig::default()
    }
}

fn close(a: f64, b: f64, what: &str) {
    assert!((a - b).abs() <= 1e-9, "{what}: streaming {a} vs oracle {b}");
}

fn check_instance(seed: u64, mode: PoseMode, strict: bool, eleven: bool, alignment: BinAlignment) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (dets, gts) = random_instance(&mut rng);
    let offset = if seed.is_multiple_of(3) { 0.0 } else { 0.1 * (seed % 7) as f64 };
    let cfg = config(mode, strict, eleven, offset, alignment);
    let report = evaluate(&dets, &gts, &cfg).unwrap();
    for (class, cr) in &report.classes {
        let o = |m| oracle_metric(&dets, &gts, class, m, strict, eleven);
        close(cr.ap.unwrap(), o(OracleMetric::Ap), "ap");
        close(cr.aos.unwrap(), o(OracleMetric::Aos), "aos");
        close(
            cr.avp3d.unwrap(),
            o(OracleMetric::Avp(OracleRule::Geodesic { threshold: GEODESIC_THRESHOLD })),
            "avp3d",
        );
        for v in VIEWS {
            let rule = match mode {
                PoseMode::Discrete => OracleRule::Discrete {
                    views: v,
                    offset,
                    edge: alignment == BinAlignment::Edge,
                },
                PoseMode::Continuous => OracleRule::Continuous { views: v },
            };
            close(cr.avp[&v], o(OracleMetric::Avp(rule)), &format!("avp{v} {mode:?}"));
        }
    }
}

#[test]
fn streaming_matches_oracle_all_point() {
    for seed in 0..300 {
        check_instance(seed, PoseMode::Discrete, false, false, BinAlignment::Centered);
        check_instance(seed, PoseMode::Continuous, false, false, BinAlignment::Centered);
    }
}

#[test]
fn streaming_matches_oracle_variants() {
    for seed in 300..500 {
        check_instance(seed, PoseMode::Discrete, true, false, BinAlignment::Edge);
        check_instance(seed, PoseMode::Continuous, false, true, BinAlignment::Centered);
        check_instance(seed, PoseMode::Discrete, false, true, BinAlignment::Edge);
    }
}

#[test]
fn matching_matches_oracle() {
    for seed in 0..500 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (dets, gts) = random_instance(&mut rng);
        for strict in [false, true] {
            let crit = IouCriterion {
                threshold: 0.5,
                rule: if strict { IouRule::Strict } else { IouRule::Geq },
            };
            for class in CLASSES {
                let table = match_detections(&dets, &gts, class, &crit);
                let order = ranked(&dets, class);
                let expected = oracle_match(&order, &gts, class, strict);
                assert_eq!(table.n_gt, n_gt(&gts, class));
                assert_eq!(table.records.len(), expected.len());
                for ((rec, d), e) in table.records.iter().zip(&order).zip(&expected) {
                    assert_eq!(rec.det_id, d.det_id, "ranking order");
                    match (rec.outcome, e) {
                        (Outcome::TruePositive, OracleOutcome::Tp(j)) => assert_eq!(rec.gt_index, Some(*j)),
                        (Outcome::FalsePositive, OracleOutcome::Fp) | (Outcome::Ignored, OracleOutcome::Ignored) => {}
                        other => panic!("seed {seed}: {other:?}"),
                    }
                }
            }
        }
    }
}

#[test]
fn ordering_invariants() {
    for seed in 0..300 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (dets, gts) = random_instance(&mut rng);
        let offset = 0.05 * seed as f64 % PI;
        let edge = config(PoseMode::Discrete, false, false, offset, BinAlignment::Edge);
        let cont = config(PoseMode::Continuous, false, false, 0.0, BinAlignment::Centered);
        let (re, rc) = (evaluate(&dets, &gts, &edge).unwrap(), evaluate(&dets, &gts, &cont).unwrap());
        for (class, e) in &re.classes {
            let c = &rc.classes[class];
            let ap = e.ap.unwrap();
            assert!(e.aos.unwrap() <= ap + 1e-12);
            for v in VIEWS {
                assert!(e.avp[&v] <= ap + 1e-12);
                assert!(c.avp[&v] <= ap + 1e-12);
            }
            assert!(e.avp[&4] >= e.avp[&8] && e.avp[&8] >= e.avp[&16] && e.avp[&8] >= e.avp[&24]);
            assert!(c.avp[&4] >= c.avp[&8] && c.avp[&8] >= c.avp[&16] && c.avp[&16] >= c.avp[&24]);
        }
    }
}

#[test]
fn geodesic_matches_quaternion_oracle() {
    use posebench::geometry::{geodesic_distance, rotation_from_pose, Pose};
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..500 {
        let p = |rng: &mut ChaCha8Rng| {
            Pose::new(
                Angle::new(rng.random_range(-PI..PI)).unwrap(),
                Angle::new(rng.random_range(-PI / 2.0..PI / 2.0)).unwrap(),
                Angle::new(rng.random_range(-PI..PI)).unwrap(),
            )
        };
        let (a, b) = (p(&mut rng), p(&mut rng));
        let d = geodesic_distance(&rotation_from_pose(&a), &rotation_from_pose(&b));
        let q = quat_relative_angle(quat_from_pose(&a), quat_from_pose(&b));
        assert!((d - q).abs() < 1e-9, "{d} vs {q}");
    }
}

fn instance_strategy() -> impl Strategy<Value = u64> {
    any::<u64>()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn removing_false_positive_never_lowers_ap(seed in instance_strategy()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (dets, gts) = random_instance(&mut rng);
        let crit = IouCriterion::default();
        let cfg = config(PoseMode::Discrete, false, false, 0.0, BinAlignment::Centered);
        let base = evaluate(&dets, &gts, &cfg).unwrap();
        for class in CLASSES {
            let table = match_detections(&dets, &gts, class, &crit);
            for rec in table.records.iter().filter(|r| r.outcome == Outcome::FalsePositive) {
                let fewer: Vec<_> = dets.iter().filter(|d| d.det_id != rec.det_id).cloned().collect();
                let after = evaluate(&fewer, &gts, &cfg).unwrap();
                if let (Some(b), Some(a)) = (base.classes.get(class), after.classes.get(class)) {
                    prop_assert!(a.ap.unwrap() >= b.ap.unwrap() - 1e-12);
                }
            }
        }
    }

    #[test]
    fn duplicate_never_raises_ap(seed in instance_strategy()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut dets, gts) = random_instance(&mut rng);
        let cfg = config(PoseMode::Discrete, false, false, 0.0, BinAlignment::Centered);
        let base = evaluate(&dets, &gts, &cfg).unwrap();
        let table = match_detections(&dets, &gts, "car", &IouCriterion::default());
        if let Some(tp) = table.records.iter().find(|r| r.is_tp()) {
            let mut dup = dets.iter().find(|d| d.det_id == tp.det_id).unwrap().clone();
            dup.det_id = 1000;
            dup.score = 0.05;
            dets.push(dup);
            let again = match_detections(&dets, &gts, "car", &IouCriterion::default());
            let outcome = again.records.iter().find(|r| r.det_id == 1000).unwrap().outcome;
            // a copy that overlaps another free object is a new hit, not a duplicate
            prop_assume!(outcome != Outcome::TruePositive);
            let after = evaluate(&dets, &gts, &cfg).unwrap();
            prop_assert!(after.classes["car"].ap.unwrap() <= base.classes["car"].ap.unwrap() + 1e-12);
        }
    }

    #[test]
    fn metrics_lie_in_unit_interval(seed in instance_strategy()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (dets, gts) = random_instance(&mut rng);
        let cfg = config(PoseMode::Continuous, false, false, 0.0, BinAlignment::Centered);
        let r = evaluate(&dets, &gts, &cfg).unwrap();
        r.check_consistency().unwrap();
        for c in r.classes.values() {
            let vals = [c.ap.unwrap(), c.aos.unwrap(), c.avp3d.unwrap()];
            for v in vals.into_iter().chain(c.avp.values().copied()) {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
