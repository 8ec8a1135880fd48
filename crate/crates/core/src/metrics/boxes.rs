use serde::{Deserialize, Serialize};

use super::MetricsError;

/// Axis-aligned box in pixel coordinates, `x1 < x2`, `y1 < y2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BoundingBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, MetricsError> {
        if ![x1, y1, x2, y2].iter().all(|v| v.is_finite()) {
            return Err(MetricsError::InvalidBox("coordinates must be finite".into()));
        }
        if !(x1 < x2 && y1 < y2) {
            return Err(MetricsError::InvalidBox(format!(
                "expected x1 < x2 and y1 < y2, got [{x1}, {y1}, {x2}, {y2}]"
            )));
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    pub fn from_array(b: [f64; 4]) -> Result<Self, MetricsError> {
        Self::new(b[0], b[1], b[2], b[3])
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

/// Intersection over union, in `[0, 1]`.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = iw * ih;
    if inter == 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Overlap threshold comparison. The default `>=` matches the usual
/// toolkit behavior; `Strict` reads the threshold as "larger than".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IouRule {
    #[default]
    Geq,
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IouCriterion {
    pub threshold: f64,
    pub rule: IouRule,
}

impl IouCriterion {
    pub fn new(threshold: f64, rule: IouRule) -> Self {
        Self { threshold, rule }
    }

    pub fn accepts(&self, overlap: f64) -> bool {
        match self.rule {
            IouRule::Geq => overlap >= self.threshold,
            IouRule::Strict => overlap > self.threshold,
        }
    }
}

impl Default for IouCriterion {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            rule: IouRule::Geq,
        }
    }
}
