//! Viewpoint error taxonomy for localized detections: correct, nearby
//! (adjacent view sector), opposite (sector of the flipped view) or other.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::geometry::{Angle, ViewBinning};
use crate::metrics::MatchTable;

/// Labels for the eight 45° sectors, bin 0 centered on the frontal view and
/// azimuth increasing towards the object's left side.
pub const SECTOR_LABELS_8: [&str; 8] = ["F", "F-L", "L", "L-RE", "RE", "RE-R", "R", "R-F"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Correct,
    Nearby,
    Opposite,
    Other,
}

impl ErrorKind {
    pub const ALL: [ErrorKind; 4] = [ErrorKind::Correct, ErrorKind::Nearby, ErrorKind::Opposite, ErrorKind::Other];

    pub fn name(self) -> &'static str {
        match self {
            ErrorKind::Correct => "correct",
            ErrorKind::Nearby => "nearby",
            ErrorKind::Opposite => "opposite",
            ErrorKind::Other => "other",
        }
    }
}

/// Categorizes a predicted azimuth against the ground truth.
///
/// Precedence is correct, nearby, opposite, other. With odd `v` there is no
/// opposite sector and such errors fall into other. With `v <= 4` a sector
/// can be both adjacent and opposite; it is reported as nearby.
pub fn classify_error(pred_az: Angle, gt_az: Angle, binning: &ViewBinning) -> ErrorKind {
    let pred = binning.bin_of(pred_az);
    let gt = binning.bin_of(gt_az);
    let v = binning.views();
    if pred == gt {
        return ErrorKind::Correct;
    }
    if binning.bin_distance(pred, gt) == 1 {
        return ErrorKind::Nearby;
    }
    if v.is_multiple_of(2) && pred == (gt + v / 2) % v {
        return ErrorKind::Opposite;
    }
    ErrorKind::Other
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CategoryCounts {
    pub correct: usize,
    pub nearby: usize,
    pub opposite: usize,
    pub other: usize,
}

impl CategoryCounts {
    pub fn add(&mut self, kind: ErrorKind) {
        *self.slot(kind) += 1;
    }

    fn slot(&mut self, kind: ErrorKind) -> &mut usize {
        match kind {
            ErrorKind::Correct => &mut self.correct,
            ErrorKind::Nearby => &mut self.nearby,
            ErrorKind::Opposite => &mut self.opposite,
            ErrorKind::Other => &mut self.other,
        }
    }

    pub fn get(&self, kind: ErrorKind) -> usize {
        match kind {
            ErrorKind::Correct => self.correct,
            ErrorKind::Nearby => self.nearby,
            ErrorKind::Opposite => self.opposite,
            ErrorKind::Other => self.other,
        }
    }

    pub fn total(&self) -> usize {
        self.correct + self.nearby + self.opposite + self.other
    }

    /// Fraction of `kind`; zero for an empty group.
    pub fn fraction(&self, kind: ErrorKind) -> f64 {
        match self.total() {
            0 => 0.0,
            n => self.get(kind) as f64 / n as f64,
        }
    }

    pub fn merge(&mut self, other: &CategoryCounts) {
        for k in ErrorKind::ALL {
            *self.slot(k) += other.get(k);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorConfusion {
    pub label: String,
    pub counts: CategoryCounts,
    /// Histogram of predicted sectors for ground truth in this sector.
    pub predicted: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassConfusion {
    pub overall: CategoryCounts,
    pub sectors: Vec<SectorConfusion>,
}

impl ClassConfusion {
    fn empty(binning: &ViewBinning) -> Self {
        let v = binning.views() as usize;
        Self {
            overall: CategoryCounts::default(),
            sectors: (0..v)
                .map(|i| SectorConfusion {
                    label: sector_label(i as u32, binning.views()),
                    counts: CategoryCounts::default(),
                    predicted: vec![0; v],
                })
                .collect(),
        }
    }

    /// Fraction of predictions that land, wrongly, either next to the true
    /// sector or in `bias_sector`.
    pub fn bias_concentration(&self, bias_sector: u32) -> f64 {
        let v = self.sectors.len();
        let total = self.overall.total();
        if total == 0 {
            return 0.0;
        }
        let hits: usize = self
            .sectors
            .iter()
            .enumerate()
            .map(|(g, s)| {
                attractor_set(g, bias_sector as usize, v)
                    .into_iter()
                    .map(|p| s.predicted[p])
                    .sum::<usize>()
            })
            .sum();
        hits as f64 / total as f64
    }

    /// Expected [`Self::bias_concentration`] if predictions were uniform over
    /// the sectors, for the same ground-truth sector distribution.
    pub fn uniform_bias_concentration(&self, bias_sector: u32) -> f64 {
        let v = self.sectors.len();
        let total = self.overall.total();
        if total == 0 {
            return 0.0;
        }
        let expected: f64 = self
            .sectors
            .iter()
            .enumerate()
            .map(|(g, s)| s.counts.total() as f64 * attractor_set(g, bias_sector as usize, v).len() as f64 / v as f64)
            .sum();
        expected / total as f64
    }
}

fn attractor_set(gt: usize, bias: usize, v: usize) -> Vec<usize> {
    let mut set = vec![(gt + 1) % v, (gt + v - 1) % v, bias % v];
    set.sort_unstable();
    set.dedup();
    set.retain(|&s| s != gt);
    set
}

pub fn sector_label(bin: u32, views: u32) -> String {
    if views == 8 {
        SECTOR_LABELS_8[bin as usize].to_string()
    } else {
        format!("bin{bin}")
    }
}

/// Per-class error breakdown over the true positives of match tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionBreakdown {
    pub views: u32,
    pub classes: BTreeMap<String, ClassConfusion>,
}

impl ConfusionBreakdown {
    pub fn overall(&self) -> CategoryCounts {
        let mut c = CategoryCounts::default();
        for cls in self.classes.values() {
            c.merge(&cls.overall);
        }
        c
    }

    /// `class,sector,category,count,fraction`; sector `all` is the class total.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,sector,category,count,fraction\n");
        for (name, cls) in &self.classes {
            let groups = std::iter::once(("all", &cls.overall))
                .chain(cls.sectors.iter().map(|s| (s.label.as_str(), &s.counts)));
            for (sector, counts) in groups {
                for k in ErrorKind::ALL {
                    let _ = writeln!(out, "{name},{sector},{},{},{}", k.name(), counts.get(k), counts.fraction(k));
                }
            }
        }
        out
    }
}

/// Classifies every true positive of `table`.
pub fn breakdown(table: &MatchTable, binning: &ViewBinning) -> ClassConfusion {
    let mut out = ClassConfusion::empty(binning);
    for r in &table.records {
        let Some(gt_pose) = r.tp_gt_pose() else { continue };
        let kind = classify_error(r.det_pose.azimuth, gt_pose.azimuth, binning);
        let g = binning.bin_of(gt_pose.azimuth) as usize;
        let p = binning.bin_of(r.det_pose.azimuth) as usize;
        out.overall.add(kind);
        out.sectors[g].counts.add(kind);
        out.sectors[g].predicted[p] += 1;
    }
    out
}

pub fn breakdown_all<'a, I>(tables: I, binning: &ViewBinning) -> ConfusionBreakdown
where
    I: IntoIterator<Item = &'a MatchTable>,
{
    ConfusionBreakdown {
        views: binning.views(),
        classes: tables
            .into_iter()
            .map(|t| (t.class.clone(), breakdown(t, binning)))
            .collect(),
    }
}
