//! Detection matching and the joint detection + viewpoint metrics.

pub mod boxes;
pub mod evaluate;
pub mod matching;
pub mod pose_rules;
pub mod precision;

use thiserror::Error;

pub use boxes::{iou, BoundingBox, IouCriterion, IouRule};
pub use evaluate::{evaluate, match_all, ClassReport, Counts, EvalConfig, EvalReport, MeanReport, Metric, PoseMode};
pub use matching::{match_detections, Detection, GroundTruthObject, MatchRecord, MatchTable, Outcome};
pub use pose_rules::{
    pose_correct_continuous, pose_correct_discrete, pose_correct_geodesic, PoseRule, GEODESIC_BOUNDARY_TOLERANCE,
    GEODESIC_THRESHOLD,
};
pub use precision::{aos, ap, avp, ApInterpolation, PrCurve, Scoring};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("invalid bounding box: {0}")]
    InvalidBox(String),
    #[error("detection {0} has a non-finite score")]
    NonFiniteScore(u64),
    #[error("invalid evaluation config: {0}")]
    InvalidConfig(String),
    #[error("report invariant violated: {0}")]
    Inconsistent(String),
}
