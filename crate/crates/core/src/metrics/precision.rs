//! Precision-recall curves and the AP family: AP, AVP and AOS.
//!
//! All three share one integral: the area under the monotone envelope of
//! a ranked curve. They differ only in what each ranked detection
//! contributes: a localization hit (AP), a hit with a correct viewpoint
//! (AVP), or the orientation similarity `(1 + cos Δaz) / 2` (AOS).

use serde::{Deserialize, Serialize};

use super::matching::{MatchRecord, MatchTable};
use super::pose_rules::PoseRule;
use crate::geometry::angular_distance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApInterpolation {
    /// Exact area under the envelope.
    #[default]
    AllPoint,
    /// Mean envelope value at recall 0, 0.1, ..., 1.
    ElevenPoint,
}

/// What a ranked detection contributes to the curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scoring {
    Localization,
    Viewpoint(PoseRule),
    Orientation,
}

impl Scoring {
    /// `(counts toward recall, numerator contribution)`.
    fn score(&self, r: &MatchRecord) -> (bool, f64) {
        let Some(gt_pose) = r.tp_gt_pose() else {
            return (false, 0.0);
        };
        match self {
            Scoring::Localization => (true, 1.0),
            Scoring::Viewpoint(rule) => {
                let ok = rule.is_correct(&r.det_pose, gt_pose);
                (ok, if ok { 1.0 } else { 0.0 })
            }
            Scoring::Orientation => {
                let d = angular_distance(r.det_pose.azimuth, gt_pose.azimuth);
                (true, 0.5 * (1.0 + d.cos()))
            }
        }
    }
}

/// Ranked curve, one point per scored detection.
///
/// For AOS `precision` holds the running orientation similarity.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PrCurve {
    pub recall: Vec<f64>,
    pub precision: Vec<f64>,
    pub scores: Vec<f64>,
}

impl PrCurve {
    pub fn from_table(table: &MatchTable, scoring: &Scoring) -> Self {
        let mut curve = PrCurve::default();
        let mut hits = 0usize;
        let mut numerator = 0.0;
        for (k, r) in table.scored().enumerate() {
            let (hit, contribution) = scoring.score(r);
            if hit {
                hits += 1;
            }
            numerator += contribution;
            let recall = if table.n_gt == 0 {
                0.0
            } else {
                hits as f64 / table.n_gt as f64
            };
            curve.recall.push(recall);
            curve.precision.push(numerator / (k + 1) as f64);
            curve.scores.push(r.score);
        }
        curve
    }

    pub fn len(&self) -> usize {
        self.recall.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recall.is_empty()
    }

    /// Running maximum of precision taken from the high-recall end.
    pub fn envelope(&self) -> Vec<f64> {
        let mut env = self.precision.clone();
        for i in (0..env.len().saturating_sub(1)).rev() {
            env[i] = env[i].max(env[i + 1]);
        }
        env
    }

    pub fn average_precision(&self, interp: ApInterpolation) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let env = self.envelope();
        match interp {
            ApInterpolation::AllPoint => {
                // Consecutive points with the same envelope value are summed as
                // one rectangle so a perfect curve integrates to exactly 1.
                let mut area = 0.0;
                let mut run_start = 0.0;
                let mut prev_recall = 0.0;
                for i in 0..env.len() {
                    if i > 0 && env[i] != env[i - 1] {
                        area += (prev_recall - run_start) * env[i - 1];
                        run_start = prev_recall;
                    }
                    prev_recall = self.recall[i];
                }
                area += (prev_recall - run_start) * env[env.len() - 1];
                area.clamp(0.0, 1.0)
            }
            ApInterpolation::ElevenPoint => {
                let total: f64 = (0..=10)
                    .map(|t| {
                        let t = f64::from(t) / 10.0;
                        self.recall
                            .iter()
                            .zip(&self.precision)
                            .filter(|(r, _)| **r >= t)
                            .map(|(_, p)| *p)
                            .fold(0.0, f64::max)
                    })
                    .sum();
                total / 11.0
            }
        }
    }
}

pub fn ap(table: &MatchTable, interp: ApInterpolation) -> f64 {
    PrCurve::from_table(table, &Scoring::Localization).average_precision(interp)
}

/// AP where a hit must also satisfy `rule`. A localized detection with the
/// wrong viewpoint is a false positive and keeps its ground truth.
pub fn avp(table: &MatchTable, rule: &PoseRule, interp: ApInterpolation) -> f64 {
    PrCurve::from_table(table, &Scoring::Viewpoint(*rule)).average_precision(interp)
}

pub fn aos(table: &MatchTable, interp: ApInterpolation) -> f64 {
    PrCurve::from_table(table, &Scoring::Orientation).average_precision(interp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Angle, Pose, ViewBinning};
    use crate::metrics::matching::Outcome;

    fn rec(outcome: Outcome, det_az_deg: f64, gt_az_deg: f64) -> MatchRecord {
        let p = |d: f64| Pose::from_azimuth(Angle::from_degrees(d).unwrap());
        MatchRecord {
            det_index: 0,
            det_id: 0,
            score: 0.0,
            outcome,
            gt_index: (outcome == Outcome::TruePositive).then_some(0),
            iou: 1.0,
            det_pose: p(det_az_deg),
            gt_pose: Some(p(gt_az_deg)),
        }
    }

    fn table(n_gt: usize, records: Vec<MatchRecord>) -> MatchTable {
        MatchTable {
            class: "car".into(),
            n_gt,
            records,
        }
    }

    use Outcome::{FalsePositive as Fp, Ignored, TruePositive as Tp};

    #[test]
    fn perfect_table_is_exactly_one() {
        for n in 1..40 {
            let t = table(n, (0..n).map(|_| rec(Tp, 5.0, 5.0)).collect());
            assert_eq!(ap(&t, ApInterpolation::AllPoint), 1.0);
            assert_eq!(aos(&t, ApInterpolation::AllPoint), 1.0);
            assert_eq!(ap(&t, ApInterpolation::ElevenPoint), 1.0);
        }
    }

    #[test]
    fn single_fp_is_zero() {
        let t = table(1, vec![rec(Fp, 0.0, 0.0)]);
        assert_eq!(ap(&t, ApInterpolation::AllPoint), 0.0);
        assert_eq!(ap(&table(0, vec![]), ApInterpolation::AllPoint), 0.0);
    }

    #[test]
    fn tp_fp_tp_over_two() {
        // ranked precisions 1, 1/2, 2/3 at recalls 1/2, 1/2, 1
        // envelope over recall: [0, 1/2] → 1, (1/2, 1] → 2/3
        let t = table(2, vec![rec(Tp, 0.0, 0.0), rec(Fp, 0.0, 0.0), rec(Tp, 0.0, 0.0)]);
        let expected = 0.5 * 1.0 + 0.5 * (2.0 / 3.0);
        assert!((ap(&t, ApInterpolation::AllPoint) - expected).abs() < 1e-15);
        // 11-point: t ≤ 0.5 → 1 (6 points), t > 0.5 → 2/3 (5 points)
        let eleven = (6.0 + 5.0 * 2.0 / 3.0) / 11.0;
        assert!((ap(&t, ApInterpolation::ElevenPoint) - eleven).abs() < 1e-15);
    }

    #[test]
    fn ignored_records_do_not_count() {
        let a = table(1, vec![rec(Ignored, 0.0, 0.0), rec(Tp, 0.0, 0.0)]);
        assert_eq!(ap(&a, ApInterpolation::AllPoint), 1.0);
    }

    #[test]
    fn avp_examples() {
        let b = PoseRule::Discrete(ViewBinning::new(8).unwrap());
        let good = table(3, (0..3).map(|_| rec(Tp, 90.0, 95.0)).collect());
        assert_eq!(avp(&good, &b, ApInterpolation::AllPoint), ap(&good, ApInterpolation::AllPoint));
        let flipped = table(3, (0..3).map(|_| rec(Tp, 0.0, 180.0)).collect());
        for v in [2, 4, 8, 16, 24] {
            let rule = PoseRule::Discrete(ViewBinning::new(v).unwrap());
            assert_eq!(avp(&flipped, &rule, ApInterpolation::AllPoint), 0.0);
        }
    }

    #[test]
    fn wrong_pose_is_fp_for_avp() {
        // TP(correct), TP(wrong pose), TP(correct) over 3 GT → AVP sees TP, FP, TP
        let b = PoseRule::Discrete(ViewBinning::new(4).unwrap());
        let t = table(3, vec![rec(Tp, 0.0, 0.0), rec(Tp, 180.0, 0.0), rec(Tp, 0.0, 0.0)]);
        let expected = (1.0 / 3.0) * 1.0 + (1.0 / 3.0) * (2.0 / 3.0);
        assert!((avp(&t, &b, ApInterpolation::AllPoint) - expected).abs() < 1e-15);
    }

    #[test]
    fn aos_examples() {
        let flipped = table(2, vec![rec(Tp, 0.0, 180.0), rec(Tp, 90.0, -90.0)]);
        assert!(aos(&flipped, ApInterpolation::AllPoint) < 1e-15);
        // one detection at 90° error: similarity 1/2 over recall 1
        let half = table(1, vec![rec(Tp, 90.0, 0.0)]);
        assert!((aos(&half, ApInterpolation::AllPoint) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn envelope_is_non_increasing() {
        let c = PrCurve {
            recall: vec![0.1, 0.2, 0.2, 0.3],
            precision: vec![1.0, 0.5, 0.7, 0.2],
            scores: vec![0.0; 4],
        };
        assert_eq!(c.envelope(), vec![1.0, 0.7, 0.7, 0.2]);
    }
}
