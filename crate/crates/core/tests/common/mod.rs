//! Brute-force reference implementations shared by the integration tests.
//!
//! Nothing here calls the library's matching, curve or rotation code; only
//! the plain data types are shared.

#![allow(dead_code)]

use std::f64::consts::{PI, TAU};

use posebench::geometry::{Angle, Pose};
use posebench::metrics::{BoundingBox, Detection, GroundTruthObject};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn oracle_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = iw * ih;
    let union = (a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - inter;
    if union > 0.0 {
        inter / union
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleOutcome {
    Tp(usize),
    Fp,
    Ignored,
}

/// Detections of `class` in ranking order: score descending, then id.
pub fn ranked<'a>(dets: &'a [Detection], class: &str) -> Vec<&'a Detection> {
    let mut v: Vec<&Detection> = dets.iter().filter(|d| d.class == class).collect();
    v.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap()
            .then(a.det_id.cmp(&b.det_id))
    });
    v
}

pub fn n_gt(gts: &[GroundTruthObject], class: &str) -> usize {
    gts.iter().filter(|g| g.class == class && !g.difficult).count()
}

/// Greedy matching of `dets`, already ranked, from an empty assignment.
pub fn oracle_match(dets: &[&Detection], gts: &[GroundTruthObject], class: &str, strict: bool) -> Vec<OracleOutcome> {
    let passes = |o: f64| if strict { o > 0.5 } else { o >= 0.5 };
    let mut taken = vec![false; gts.len()];
    let mut out = Vec::new();
    for d in dets {
        let mut best: Option<(usize, f64)> = None;
        let mut hits_difficult = false;
        for (j, g) in gts.iter().enumerate() {
            if g.class != class || g.image_id != d.image_id {
                continue;
            }
            let o = oracle_iou(&d.bbox, &g.bbox);
            if !passes(o) {
                continue;
            }
            if g.difficult {
                hits_difficult = true;
            } else if !taken[j] && best.is_none_or(|(_, b)| o > b) {
                best = Some((j, o));
            }
        }
        out.push(match best {
            Some((j, _)) => {
                taken[j] = true;
                OracleOutcome::Tp(j)
            }
            None if hits_difficult => OracleOutcome::Ignored,
            None => OracleOutcome::Fp,
        });
    }
    out
}

fn centered_mod(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Unsigned difference of two angles, in `[0, π]`.
pub fn oracle_angle_diff(a: f64, b: f64) -> f64 {
    centered_mod(a - b).abs()
}

pub fn oracle_bin(a: f64, views: u32, offset: f64, edge: bool) -> u32 {
    let w = TAU / f64::from(views);
    let shift = if edge { 0.0 } else { w / 2.0 };
    let idx = ((a - offset + shift).rem_euclid(TAU) / w).floor() as u32;
    idx % views
}

type Quat = [f64; 4];

fn qmul(a: Quat, b: Quat) -> Quat {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

pub fn quat_axis_angle(axis: [f64; 3], theta: f64) -> Quat {
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let (s, c) = (theta / 2.0).sin_cos();
    [c, s * axis[0] / n, s * axis[1] / n, s * axis[2] / n]
}

/// Quaternion of `Rz(inplane)·Rx(−elevation)·Rz(−azimuth)`.
pub fn quat_from_pose(p: &Pose) -> Quat {
    let z = [0.0, 0.0, 1.0];
    let x = [1.0, 0.0, 0.0];
    qmul(
        qmul(quat_axis_angle(z, p.inplane.radians()), quat_axis_angle(x, -p.elevation.radians())),
        quat_axis_angle(z, -p.azimuth.radians()),
    )
}

/// Rotation angle between two unit quaternions, in `[0, π]`.
pub fn quat_relative_angle(a: Quat, b: Quat) -> f64 {
    let conj = [b[0], -b[1], -b[2], -b[3]];
    let r = qmul(conj, a);
    let v = (r[1] * r[1] + r[2] * r[2] + r[3] * r[3]).sqrt();
    2.0 * v.atan2(r[0].abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleRule {
    Discrete { views: u32, offset: f64, edge: bool },
    Continuous { views: u32 },
    Geodesic { threshold: f64 },
}

impl OracleRule {
    pub fn correct(&self, det: &Pose, gt: &Pose) -> bool {
        match *self {
            OracleRule::Discrete { views, offset, edge } => {
                oracle_bin(det.azimuth.radians(), views, offset, edge)
                    == oracle_bin(gt.azimuth.radians(), views, offset, edge)
            }
            OracleRule::Continuous { views } => {
                oracle_angle_diff(det.azimuth.radians(), gt.azimuth.radians()) < TAU / f64::from(views)
            }
            OracleRule::Geodesic { threshold } => {
                quat_relative_angle(quat_from_pose(det), quat_from_pose(gt)) < threshold
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OracleMetric {
    Ap,
    Avp(OracleRule),
    Aos,
}

/// (recall, precision) at every rank that a non-ignored detection ends,
/// each computed by matching that prefix from scratch.
pub fn oracle_curve(
    dets: &[Detection],
    gts: &[GroundTruthObject],
    class: &str,
    metric: OracleMetric,
    strict: bool,
) -> Vec<(f64, f64)> {
    let order = ranked(dets, class);
    let n = n_gt(gts, class);
    let mut pts = Vec::new();
    for k in 1..=order.len() {
        let prefix = &order[..k];
        let outcomes = oracle_match(prefix, gts, class, strict);
        if outcomes[k - 1] == OracleOutcome::Ignored {
            continue;
        }
        let mut counted = 0usize;
        let mut recall_hits = 0usize;
        let mut numerator = 0.0;
        for (d, o) in prefix.iter().zip(&outcomes) {
            match o {
                OracleOutcome::Ignored => {}
                OracleOutcome::Fp => counted += 1,
                OracleOutcome::Tp(j) => {
                    counted += 1;
                    let g = &gts[*j].pose;
                    match metric {
                        OracleMetric::Ap => {
                            recall_hits += 1;
                            numerator += 1.0;
                        }
                        OracleMetric::Avp(rule) => {
                            if rule.correct(&d.pose, g) {
                                recall_hits += 1;
                                numerator += 1.0;
                            }
                        }
                        OracleMetric::Aos => {
                            recall_hits += 1;
                            numerator += 0.5 * (1.0 + (d.pose.azimuth.radians() - g.azimuth.radians()).cos());
                        }
                    }
                }
            }
        }
        let recall = if n == 0 { 0.0 } else { recall_hits as f64 / n as f64 };
        pts.push((recall, numerator / counted as f64));
    }
    pts
}

/// Area under the curve where the precision at each recall level is the
/// best precision at that recall or beyond.
pub fn oracle_all_point(pts: &[(f64, f64)]) -> f64 {
    let mut area = 0.0;
    let mut prev = 0.0;
    for (r, _) in pts {
        if *r > prev {
            let best = pts.iter().filter(|(r2, _)| *r2 >= *r).map(|(_, p)| *p).fold(0.0, f64::max);
            area += (r - prev) * best;
            prev = *r;
        }
    }
    area
}

pub fn oracle_eleven_point(pts: &[(f64, f64)]) -> f64 {
    (0..=10)
        .map(|t| {
            let t = f64::from(t) / 10.0;
            pts.iter().filter(|(r, _)| *r >= t).map(|(_, p)| *p).fold(0.0, f64::max)
        })
        .sum::<f64>()
        / 11.0
}

pub fn oracle_metric(
    dets: &[Detection],
    gts: &[GroundTruthObject],
    class: &str,
    metric: OracleMetric,
    strict: bool,
    eleven: bool,
) -> f64 {
    if n_gt(gts, class) == 0 {
        return 0.0;
    }
    let pts = oracle_curve(dets, gts, class, metric, strict);
    if eleven {
        oracle_eleven_point(&pts)
    } else {
        oracle_all_point(&pts)
    }
}

pub const CLASSES: [&str; 2] = ["car", "bus"];

fn random_pose(rng: &mut ChaCha8Rng) -> Pose {
    Pose::new(
        Angle::new(rng.random_range(-PI..PI)).unwrap(),
        Angle::new(rng.random_range(-0.5..0.5)).unwrap(),
        Angle::new(rng.random_range(-0.3..0.3)).unwrap(),
    )
}

fn near_pose(rng: &mut ChaCha8Rng, base: &Pose) -> Pose {
    let spread = [0.05, 0.3, 1.0, PI][rng.random_range(0..4)];
    let j = |rng: &mut ChaCha8Rng, s: f64| rng.random_range(-s..s);
    Pose::new(
        base.azimuth.rotate(j(rng, spread)).unwrap(),
        base.elevation.rotate(j(rng, spread / 4.0)).unwrap(),
        base.inplane.rotate(j(rng, spread / 4.0)).unwrap(),
    )
}

fn grid_box(rng: &mut ChaCha8Rng) -> BoundingBox {
    let x = [0.0, 5.0, 10.0, 20.0][rng.random_range(0..4)];
    let y = [0.0, 5.0, 10.0][rng.random_range(0..3)];
    let w = [10.0, 20.0][rng.random_range(0..2)];
    let h = [10.0, 20.0][rng.random_range(0..2)];
    BoundingBox::new(x, y, x + w, y + h).unwrap()
}

/// Small instance with many ties: a few images, both classes, boxes on a
/// coarse grid and scores from a short list.
pub fn random_instance(rng: &mut ChaCha8Rng) -> (Vec<Detection>, Vec<GroundTruthObject>) {
    let images = rng.random_range(1..=5);
    let n_gt = rng.random_range(0..=5);
    let n_det = rng.random_range(0..=8);
    let img = |rng: &mut ChaCha8Rng| format!("i{}", rng.random_range(0..images));
    let gts: Vec<GroundTruthObject> = (0..n_gt)
        .map(|_| GroundTruthObject {
            image_id: img(rng),
            class: CLASSES[rng.random_range(0..2)].into(),
            bbox: grid_box(rng),
            pose: random_pose(rng),
            difficult: rng.random_bool(0.2),
        })
        .collect();
    let dets = (0..n_det)
        .map(|i| {
            let score = f64::from(rng.random_range(1..=5)) / 5.0;
            let (image_id, class, bbox, pose) = if !gts.is_empty() && rng.random_bool(0.7) {
                let g = &gts[rng.random_range(0..gts.len())];
                let b = if rng.random_bool(0.6) {
                    g.bbox
                } else {
                    let dx = [-5.0, -2.5, 2.5, 5.0][rng.random_range(0..4)];
                    BoundingBox::new(g.bbox.x1 + dx, g.bbox.y1, g.bbox.x2 + dx, g.bbox.y2).unwrap()
                };
                (g.image_id.clone(), g.class.clone(), b, near_pose(rng, &g.pose))
            } else {
                (img(rng), CLASSES[rng.random_range(0..2)].to_string(), grid_box(rng), random_pose(rng))
            };
            Detection {
                image_id,
                class,
                bbox,
                score,
                pose,
                det_id: i as u64,
            }
        })
        .collect();
    (dets, gts)
}
