//! When a localized detection also counts as a correct viewpoint.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::matching::{Detection, GroundTruthObject};
use crate::geometry::{angular_distance, geodesic_distance, rotation_from_pose, Pose, ViewBinning};

/// Default geodesic threshold for full 3D pose correctness.
pub const GEODESIC_THRESHOLD: f64 = PI / 6.0;

/// Rounding slack of the pose-to-rotation-to-distance pipeline. A distance
/// within this much of the threshold counts as reaching it, so a rotation
/// built from an angle of exactly `threshold` is rejected.
pub const GEODESIC_BOUNDARY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum PoseRule {
    /// Same azimuth bin.
    Discrete(ViewBinning),
    /// Azimuth distance strictly below `2π / views`.
    Continuous { views: u32 },
    /// Rotation distance strictly below `threshold`.
    Geodesic { threshold: f64 },
}

impl PoseRule {
    pub fn is_correct(&self, det: &Pose, gt: &Pose) -> bool {
        match self {
            PoseRule::Discrete(binning) => binning.bin_of(det.azimuth) == binning.bin_of(gt.azimuth),
            PoseRule::Continuous { views } => {
                angular_distance(det.azimuth, gt.azimuth) < TAU / f64::from(*views)
            }
            PoseRule::Geodesic { threshold } => {
                geodesic_distance(&rotation_from_pose(det), &rotation_from_pose(gt))
                    < *threshold - GEODESIC_BOUNDARY_TOLERANCE
            }
        }
    }
}

pub fn pose_correct_discrete(det: &Detection, gt: &GroundTruthObject, binning: &ViewBinning) -> bool {
    PoseRule::Discrete(*binning).is_correct(&det.pose, &gt.pose)
}

pub fn pose_correct_continuous(det: &Detection, gt: &GroundTruthObject, views: u32) -> bool {
    PoseRule::Continuous { views }.is_correct(&det.pose, &gt.pose)
}

pub fn pose_correct_geodesic(det: &Detection, gt: &GroundTruthObject, threshold: f64) -> bool {
    PoseRule::Geodesic { threshold }.is_correct(&det.pose, &gt.pose)
}
