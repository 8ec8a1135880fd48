//! Greedy score-ordered assignment of detections to ground truth.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::boxes::{iou, BoundingBox, IouCriterion};
use crate::geometry::Pose;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthObject {
    pub image_id: String,
    pub class: String,
    pub bbox: BoundingBox,
    pub pose: Pose,
    pub difficult: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub image_id: String,
    pub class: String,
    pub bbox: BoundingBox,
    pub score: f64,
    pub pose: Pose,
    /// Tie-break key for equal scores; lower ranks first.
    pub det_id: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    TruePositive,
    FalsePositive,
    /// Overlaps a difficult object only; excluded from scoring.
    Ignored,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchRecord {
    /// Index into the detection slice passed to [`match_detections`].
    pub det_index: usize,
    pub det_id: u64,
    pub score: f64,
    pub outcome: Outcome,
    /// Claimed ground truth for true positives; the blocking object for
    /// ignored and duplicate detections.
    pub gt_index: Option<usize>,
    pub iou: f64,
    pub det_pose: Pose,
    pub gt_pose: Option<Pose>,
}

impl MatchRecord {
    pub fn is_tp(&self) -> bool {
        self.outcome == Outcome::TruePositive
    }

    /// Ground-truth pose of a true positive.
    pub fn tp_gt_pose(&self) -> Option<&Pose> {
        if self.is_tp() {
            self.gt_pose.as_ref()
        } else {
            None
        }
    }
}

/// Detections of one class, ranked by descending score, with their
/// localization outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchTable {
    pub class: String,
    /// Non-difficult ground-truth objects of the class.
    pub n_gt: usize,
    pub records: Vec<MatchRecord>,
}

impl MatchTable {
    /// Records that take part in scoring (ignored ones removed).
    pub fn scored(&self) -> impl Iterator<Item = &MatchRecord> {
        self.records.iter().filter(|r| r.outcome != Outcome::Ignored)
    }

    pub fn true_positives(&self) -> usize {
        self.records.iter().filter(|r| r.is_tp()).count()
    }

    pub fn false_positives(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.outcome == Outcome::FalsePositive)
            .count()
    }

    pub fn ignored(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.outcome == Outcome::Ignored)
            .count()
    }
}

/// Descending score, then ascending `det_id`.
pub fn rank_order(a: &Detection, b: &Detection) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.det_id.cmp(&b.det_id))
}

/// Assigns the detections of `class` to its ground truth.
///
/// In rank order each detection claims the unmatched non-difficult object
/// of its image with the highest accepted overlap (ties go to the earlier
/// object). Failing that, a detection overlapping a difficult object is
/// ignored, and anything else is a false positive. Detections and objects
/// of other classes are skipped.
pub fn match_detections(
    dets: &[Detection],
    gts: &[GroundTruthObject],
    class: &str,
    criterion: &IouCriterion,
) -> MatchTable {
    let mut by_image: HashMap<&str, Vec<usize>> = HashMap::new();
    let mut n_gt = 0;
    for (i, g) in gts.iter().enumerate() {
        if g.class == class {
            by_image.entry(g.image_id.as_str()).or_default().push(i);
            if !g.difficult {
                n_gt += 1;
            }
        }
    }

    let mut order: Vec<usize> = (0..dets.len()).filter(|&i| dets[i].class == class).collect();
    order.sort_by(|&a, &b| rank_order(&dets[a], &dets[b]));

    let mut claimed = vec![false; gts.len()];
    let mut records = Vec::with_capacity(order.len());
    for det_index in order {
        let det = &dets[det_index];
        let mut best_free: Option<(usize, f64)> = None;
        let mut best_difficult: Option<(usize, f64)> = None;
        let mut best_taken: Option<(usize, f64)> = None;
        for &gi in by_image.get(det.image_id.as_str()).into_iter().flatten() {
            let g = &gts[gi];
            let overlap = iou(&det.bbox, &g.bbox);
            if !criterion.accepts(overlap) {
                continue;
            }
            let slot = if g.difficult {
                &mut best_difficult
            } else if claimed[gi] {
                &mut best_taken
            } else {
                &mut best_free
            };
            if slot.is_none_or(|(_, o)| overlap > o) {
                *slot = Some((gi, overlap));
            }
        }

        let (outcome, hit) = if let Some(hit) = best_free {
            claimed[hit.0] = true;
            (Outcome::TruePositive, Some(hit))
        } else if let Some(hit) = best_difficult {
            (Outcome::Ignored, Some(hit))
        } else {
            (Outcome::FalsePositive, best_taken)
        };
        records.push(MatchRecord {
            det_index,
            det_id: det.det_id,
            score: det.score,
            outcome,
            gt_index: hit.map(|h| h.0),
            iou: hit.map_or(0.0, |h| h.1),
            det_pose: det.pose,
            gt_pose: hit.map(|h| gts[h.0].pose),
        });
    }

    MatchTable {
        class: class.to_string(),
        n_gt,
        records,
    }
}
