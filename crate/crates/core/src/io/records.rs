//! JSON-lines annotation and detection files.
//!
//! One JSON object per line. Angles are in degrees and are wrapped to
//! `[-180, 180)` on ingestion; the conversion to radians happens only when a
//! record is turned into a domain object. Unknown fields are kept and
//! written back unchanged. A line holding a single `_meta` key is a file
//! header and is skipped by the readers.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::IoError;
use crate::geometry::{Angle, Pose};
use crate::metrics::{BoundingBox, Detection, GroundTruthObject};

pub const META_KEY: &str = "_meta";

/// Maps degrees onto `[-180, 180)`; canonical values pass through unchanged.
pub fn wrap_degrees(d: f64) -> f64 {
    if (-180.0..180.0).contains(&d) {
        return d;
    }
    let mut r = (d + 180.0).rem_euclid(360.0) - 180.0;
    if r >= 180.0 {
        r -= 360.0;
    }
    r
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtRecord {
    pub image: String,
    pub class: String,
    pub bbox: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub azimuth_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elevation_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_deg: Option<f64>,
    #[serde(default)]
    pub difficult: bool,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
    /// 1-based source line; 0 for records built in memory.
    #[serde(skip)]
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetRecord {
    pub image: String,
    pub class: String,
    pub bbox: [f64; 4],
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub azimuth_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elevation_deg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_deg: Option<f64>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
    #[serde(skip)]
    pub line: usize,
}

fn pose_from_degrees(line: usize, az: Option<f64>, el: Option<f64>, th: Option<f64>) -> Result<Pose, IoError> {
    let conv = |field: &str, d: Option<f64>| {
        Angle::from_degrees(d.unwrap_or(0.0)).map_err(|e| IoError::field(line, field, e.to_string()))
    };
    Ok(Pose::new(
        conv("azimuth_deg", az)?,
        conv("elevation_deg", el)?,
        conv("theta_deg", th)?,
    ))
}

fn bbox_of(line: usize, b: [f64; 4]) -> Result<BoundingBox, IoError> {
    BoundingBox::from_array(b).map_err(|e| IoError::field(line, "bbox", e.to_string()))
}

/// Which pose angles a consumer needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AngleRequirement {
    None,
    Azimuth,
    All,
}

fn check_angles(
    line: usize,
    req: AngleRequirement,
    az: Option<f64>,
    el: Option<f64>,
    th: Option<f64>,
) -> Result<(), IoError> {
    let needed: &[(&str, Option<f64>)] = match req {
        AngleRequirement::None => &[],
        AngleRequirement::Azimuth => &[("azimuth_deg", az)],
        AngleRequirement::All => &[("azimuth_deg", az), ("elevation_deg", el), ("theta_deg", th)],
    };
    for (field, v) in needed {
        if v.is_none() {
            return Err(IoError::field(line, field, "missing but required by the requested metrics"));
        }
    }
    Ok(())
}

impl GtRecord {
    pub fn new(image: impl Into<String>, class: impl Into<String>, bbox: [f64; 4], pose_deg: [f64; 3], difficult: bool) -> Self {
        Self {
            image: image.into(),
            class: class.into(),
            bbox,
            azimuth_deg: Some(pose_deg[0]),
            elevation_deg: Some(pose_deg[1]),
            theta_deg: Some(pose_deg[2]),
            difficult,
            extra: Map::new(),
            line: 0,
        }
    }

    pub fn require_angles(&self, req: AngleRequirement) -> Result<(), IoError> {
        check_angles(self.line, req, self.azimuth_deg, self.elevation_deg, self.theta_deg)
    }

    /// Missing angles become zero.
    pub fn to_domain(&self) -> Result<GroundTruthObject, IoError> {
        Ok(GroundTruthObject {
            image_id: self.image.clone(),
            class: self.class.clone(),
            bbox: bbox_of(self.line, self.bbox)?,
            pose: pose_from_degrees(self.line, self.azimuth_deg, self.elevation_deg, self.theta_deg)?,
            difficult: self.difficult,
        })
    }

    fn canonicalize(&mut self) {
        for a in [&mut self.azimuth_deg, &mut self.elevation_deg, &mut self.theta_deg].into_iter().flatten() {
            *a = wrap_degrees(*a);
        }
    }
}

impl DetRecord {
    pub fn new(image: impl Into<String>, class: impl Into<String>, bbox: [f64; 4], score: f64, pose_deg: [f64; 3]) -> Self {
        Self {
            image: image.into(),
            class: class.into(),
            bbox,
            score,
            azimuth_deg: Some(pose_deg[0]),
            elevation_deg: Some(pose_deg[1]),
            theta_deg: Some(pose_deg[2]),
            extra: Map::new(),
            line: 0,
        }
    }

    pub fn require_angles(&self, req: AngleRequirement) -> Result<(), IoError> {
        check_angles(self.line, req, self.azimuth_deg, self.elevation_deg, self.theta_deg)
    }

    pub fn to_domain(&self, det_id: u64) -> Result<Detection, IoError> {
        Ok(Detection {
            image_id: self.image.clone(),
            class: self.class.clone(),
            bbox: bbox_of(self.line, self.bbox)?,
            score: self.score,
            pose: pose_from_degrees(self.line, self.azimuth_deg, self.elevation_deg, self.theta_deg)?,
            det_id,
        })
    }

    fn canonicalize(&mut self) {
        for a in [&mut self.azimuth_deg, &mut self.elevation_deg, &mut self.theta_deg].into_iter().flatten() {
            *a = wrap_degrees(*a);
        }
    }
}

/// Ground truth as domain objects.
pub fn gt_to_domain(records: &[GtRecord]) -> Result<Vec<GroundTruthObject>, IoError> {
    records.iter().map(GtRecord::to_domain).collect()
}

/// Detections as domain objects; `det_id` is the record's position.
pub fn det_to_domain(records: &[DetRecord]) -> Result<Vec<Detection>, IoError> {
    records
        .iter()
        .enumerate()
        .map(|(i, r)| r.to_domain(i as u64))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    GroundTruth,
    Detection,
}

fn expect_string(line: usize, obj: &Map<String, Value>, field: &str) -> Result<(), IoError> {
    match obj.get(field) {
        Some(Value::String(s)) if !s.is_empty() => Ok(()),
        Some(Value::String(_)) => Err(IoError::field(line, field, "must be a nonempty string")),
        Some(_) => Err(IoError::field(line, field, "must be a string")),
        None => Err(IoError::field(line, field, "missing")),
    }
}

fn expect_number(line: usize, obj: &Map<String, Value>, field: &str, required: bool) -> Result<(), IoError> {
    match obj.get(field) {
        Some(Value::Number(n)) => match n.as_f64() {
            Some(x) if x.is_finite() => Ok(()),
            _ => Err(IoError::field(line, field, "must be a finite number")),
        },
        None | Some(Value::Null) if !required => Ok(()),
        None => Err(IoError::field(line, field, "missing")),
        Some(_) => Err(IoError::field(line, field, "must be a number")),
    }
}

fn validate_object(line: usize, obj: &Map<String, Value>, kind: RecordKind) -> Result<(), IoError> {
    expect_string(line, obj, "image")?;
    expect_string(line, obj, "class")?;
    match obj.get("bbox") {
        Some(Value::Array(items)) if items.len() == 4 => {
            let mut b = [0.0; 4];
            for (slot, item) in b.iter_mut().zip(items) {
                *slot = item
                    .as_f64()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| IoError::field(line, "bbox", "coordinates must be finite numbers"))?;
            }
            bbox_of(line, b)?;
        }
        Some(_) => return Err(IoError::field(line, "bbox", "must be an array [x1, y1, x2, y2]")),
        None => return Err(IoError::field(line, "bbox", "missing")),
    }
    for f in ["azimuth_deg", "elevation_deg", "theta_deg"] {
        expect_number(line, obj, f, false)?;
    }
    match kind {
        RecordKind::GroundTruth => {
            if let Some(v) = obj.get("difficult") {
                if !v.is_boolean() {
                    return Err(IoError::field(line, "difficult", "must be a boolean"));
                }
            }
        }
        RecordKind::Detection => expect_number(line, obj, "score", true)?,
    }
    Ok(())
}

/// Parses one line into a JSON object, or `None` for blank and header lines.
fn parse_line(line_no: usize, text: &str, kind: RecordKind) -> Result<Option<Map<String, Value>>, IoError> {
    if text.trim().is_empty() {
        return Ok(None);
    }
    let value: Value = serde_json::from_str(text).map_err(|e| IoError::Parse {
        line: line_no,
        field: None,
        message: e.to_string(),
    })?;
    let Value::Object(obj) = value else {
        return Err(IoError::Parse {
            line: line_no,
            field: None,
            message: "expected a JSON object".into(),
        });
    };
    if obj.len() == 1 && obj.contains_key(META_KEY) {
        return Ok(None);
    }
    validate_object(line_no, &obj, kind)?;
    Ok(Some(obj))
}

fn from_object<T: serde::de::DeserializeOwned>(line: usize, obj: Map<String, Value>) -> Result<T, IoError> {
    serde_json::from_value(Value::Object(obj)).map_err(|e| IoError::Parse {
        line,
        field: None,
        message: e.to_string(),
    })
}

pub fn parse_gt(text: &str) -> Result<Vec<GtRecord>, IoError> {
    let mut out = Vec::new();
    for (i, l) in text.lines().enumerate() {
        if let Some(obj) = parse_line(i + 1, l, RecordKind::GroundTruth)? {
            let mut r: GtRecord = from_object(i + 1, obj)?;
            r.line = i + 1;
            r.canonicalize();
            out.push(r);
        }
    }
    Ok(out)
}

pub fn parse_det(text: &str) -> Result<Vec<DetRecord>, IoError> {
    let mut out = Vec::new();
    for (i, l) in text.lines().enumerate() {
        if let Some(obj) = parse_line(i + 1, l, RecordKind::Detection)? {
            let mut r: DetRecord = from_object(i + 1, obj)?;
            r.line = i + 1;
            r.canonicalize();
            out.push(r);
        }
    }
    Ok(out)
}

fn read(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_gt(path: impl AsRef<Path>) -> Result<Vec<GtRecord>, IoError> {
    let path = path.as_ref();
    parse_gt(&read(path)?).map_err(|e| e.in_file(path))
}

pub fn load_det(path: impl AsRef<Path>) -> Result<Vec<DetRecord>, IoError> {
    let path = path.as_ref();
    parse_det(&read(path)?).map_err(|e| e.in_file(path))
}

/// Serializes records one per line, preceded by an optional header.
pub fn to_jsonl<T: Serialize>(records: &[T], meta: Option<&Value>) -> Result<String, IoError> {
    let mut out = String::new();
    if let Some(meta) = meta {
        let mut header = Map::new();
        header.insert(META_KEY.into(), meta.clone());
        out.push_str(&serde_json::to_string(&Value::Object(header))?);
        out.push('\n');
    }
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn save_jsonl<T: Serialize>(path: impl AsRef<Path>, records: &[T], meta: Option<&Value>) -> Result<(), IoError> {
    let path = path.as_ref();
    let text = to_jsonl(records, meta)?;
    let mut f = fs::File::create(path).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    f.write_all(text.as_bytes()).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })
}
