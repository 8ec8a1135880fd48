//! Per-class evaluation and mean aggregation.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::boxes::IouCriterion;
use super::matching::{match_detections, Detection, GroundTruthObject, MatchTable};
use super::pose_rules::{PoseRule, GEODESIC_THRESHOLD};
use super::precision::{aos, ap, avp, ApInterpolation};
use super::MetricsError;
use crate::geometry::{Angle, BinAlignment, ViewBinning};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoseMode {
    #[default]
    Discrete,
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Ap,
    Avp,
    Aos,
    Avp3d,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub views: Vec<u32>,
    pub pose_mode: PoseMode,
    pub metrics: BTreeSet<Metric>,
    pub iou: IouCriterion,
    pub interpolation: ApInterpolation,
    pub bin_offset: Angle,
    pub bin_alignment: BinAlignment,
    pub geodesic_threshold: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            views: vec![4, 8, 16, 24],
            pose_mode: PoseMode::Discrete,
            metrics: [Metric::Ap, Metric::Avp, Metric::Aos].into_iter().collect(),
            iou: IouCriterion::default(),
            interpolation: ApInterpolation::AllPoint,
            bin_offset: Angle::ZERO,
            bin_alignment: BinAlignment::Centered,
            geodesic_threshold: GEODESIC_THRESHOLD,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if self.metrics.contains(&Metric::Avp) && self.views.is_empty() {
            return Err(MetricsError::InvalidConfig("avp requires at least one view count".into()));
        }
        if self.views.contains(&0) {
            return Err(MetricsError::InvalidConfig("view counts must be positive".into()));
        }
        if !(self.iou.threshold > 0.0 && self.iou.threshold <= 1.0) {
            return Err(MetricsError::InvalidConfig("iou threshold must be in (0, 1]".into()));
        }
        if !(self.geodesic_threshold > 0.0 && self.geodesic_threshold.is_finite()) {
            return Err(MetricsError::InvalidConfig("geodesic threshold must be positive".into()));
        }
        Ok(())
    }

    /// Viewpoint rule for `views` under the configured pose mode.
    pub fn pose_rule(&self, views: u32) -> Result<PoseRule, MetricsError> {
        Ok(match self.pose_mode {
            PoseMode::Discrete => PoseRule::Discrete(
                ViewBinning::with_offset(views, self.bin_offset, self.bin_alignment)
                    .map_err(|e| MetricsError::InvalidConfig(e.to_string()))?,
            ),
            PoseMode::Continuous => PoseRule::Continuous { views },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub gt: usize,
    pub difficult: usize,
    pub detections: usize,
    pub tp: usize,
    pub fp: usize,
    pub ignored: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassReport {
    /// False when the class has no non-difficult ground truth; such classes
    /// are left out of the means.
    pub evaluated: bool,
    pub counts: Counts,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ap: Option<f64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub avp: BTreeMap<u32, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aos: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub avp3d: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanReport {
    pub classes_evaluated: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map: Option<f64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub mavp: BTreeMap<u32, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub maos: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mavp3d: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub classes: BTreeMap<String, ClassReport>,
    pub mean: MeanReport,
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

impl EvalReport {
    fn compute_means(classes: &BTreeMap<String, ClassReport>) -> MeanReport {
        let evaluated: Vec<&ClassReport> = classes.values().filter(|c| c.evaluated).collect();
        let collect = |f: &dyn Fn(&ClassReport) -> Option<f64>| -> Option<f64> {
            let vals: Vec<f64> = evaluated.iter().filter_map(|c| f(c)).collect();
            let any = classes.values().any(|c| f(c).is_some());
            any.then(|| mean(&vals))
        };
        let views: BTreeSet<u32> = classes.values().flat_map(|c| c.avp.keys().copied()).collect();
        MeanReport {
            classes_evaluated: evaluated.len(),
            map: collect(&|c| c.ap),
            mavp: views
                .into_iter()
                .map(|v| (v, collect(&|c| c.avp.get(&v).copied()).unwrap_or(0.0)))
                .collect(),
            maos: collect(&|c| c.aos),
            mavp3d: collect(&|c| c.avp3d),
        }
    }

    /// Recomputes the means from the per-class values and checks every
    /// metric lies in `[0, 1]`.
    pub fn check_consistency(&self) -> Result<(), MetricsError> {
        let fresh = Self::compute_means(&self.classes);
        if fresh != self.mean {
            return Err(MetricsError::Inconsistent("means differ from per-class values".into()));
        }
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        for (name, c) in &self.classes {
            let vals = c.ap.iter().chain(c.avp.values()).chain(c.aos.iter()).chain(c.avp3d.iter());
            for v in vals {
                if !in_unit(*v) {
                    return Err(MetricsError::Inconsistent(format!("class {name}: value {v} outside [0, 1]")));
                }
            }
            if c.counts.tp + c.counts.fp + c.counts.ignored != c.counts.detections || c.counts.tp > c.counts.gt {
                return Err(MetricsError::Inconsistent(format!("class {name}: counts do not add up")));
            }
        }
        Ok(())
    }
}

/// Every class that appears in either input, sorted.
pub fn classes_of(dets: &[Detection], gts: &[GroundTruthObject]) -> BTreeSet<String> {
    gts.iter()
        .map(|g| g.class.clone())
        .chain(dets.iter().map(|d| d.class.clone()))
        .collect()
}

/// One match table per class.
pub fn match_all(
    dets: &[Detection],
    gts: &[GroundTruthObject],
    criterion: &IouCriterion,
) -> BTreeMap<String, MatchTable> {
    classes_of(dets, gts)
        .into_iter()
        .map(|c| {
            let t = match_detections(dets, gts, &c, criterion);
            (c, t)
        })
        .collect()
}

fn class_report(
    table: &MatchTable,
    gts: &[GroundTruthObject],
    config: &EvalConfig,
    rules: &[(u32, PoseRule)],
) -> ClassReport {
    let difficult = gts.iter().filter(|g| g.class == table.class && g.difficult).count();
    let counts = Counts {
        gt: table.n_gt,
        difficult,
        detections: table.records.len(),
        tp: table.true_positives(),
        fp: table.false_positives(),
        ignored: table.ignored(),
    };
    let evaluated = table.n_gt > 0;
    let interp = config.interpolation;
    let wants = |m: Metric| config.metrics.contains(&m);
    let value = |f: &dyn Fn() -> f64| if evaluated { f() } else { 0.0 };
    ClassReport {
        evaluated,
        counts,
        ap: wants(Metric::Ap).then(|| value(&|| ap(table, interp))),
        avp: if wants(Metric::Avp) {
            rules
                .iter()
                .map(|(v, rule)| (*v, value(&|| avp(table, rule, interp))))
                .collect()
        } else {
            BTreeMap::new()
        },
        aos: wants(Metric::Aos).then(|| value(&|| aos(table, interp))),
        avp3d: wants(Metric::Avp3d).then(|| {
            let rule = PoseRule::Geodesic {
                threshold: config.geodesic_threshold,
            };
            value(&|| avp(table, &rule, interp))
        }),
    }
}

/// Matches every class and computes the configured metrics and their means.
pub fn evaluate(
    dets: &[Detection],
    gts: &[GroundTruthObject],
    config: &EvalConfig,
) -> Result<EvalReport, MetricsError> {
    config.validate()?;
    for d in dets {
        if !d.score.is_finite() {
            return Err(MetricsError::NonFiniteScore(d.det_id));
        }
    }
    let rules: Vec<(u32, PoseRule)> = config
        .views
        .iter()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(|&v| config.pose_rule(v).map(|r| (v, r)))
        .collect::<Result<_, _>>()?;
    let classes: BTreeMap<String, ClassReport> = match_all(dets, gts, &config.iou)
        .into_iter()
        .map(|(name, table)| {
            let report = class_report(&table, gts, config, &rules);
            (name, report)
        })
        .collect();
    let mean = EvalReport::compute_means(&classes);
    Ok(EvalReport { classes, mean })
}
