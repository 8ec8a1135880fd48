//! Pose losses (discrete and continuous), detection losses, the weighted
//! multi-task sum, gradient clipping and a finite-difference checker.
//!
//! Every loss is per sample and returns its value together with the
//! gradient with respect to the prediction. [`batch_mean`] turns a batch of
//! per-sample results into the `1/N`-averaged form.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{encode, Angle, CirclePoint, Pose};

/// Azimuth slots per class in the discrete pose layout.
pub const POSE_BINS: usize = 360;

/// Gradient norm threshold used when training the pose branch.
pub const DEFAULT_CLIP_THRESHOLD: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("pose logits length {0} is not a multiple of {POSE_BINS}")]
    BadLayout(usize),
    #[error("class {class} has no pose block (only {classes} foreground classes)")]
    MaskingViolation { class: usize, classes: usize },
    #[error("label class {label} does not match the foreground class {foreground}")]
    ClassMismatch { label: usize, foreground: usize },
    #[error("expected a {expected} label")]
    LabelMode { expected: &'static str },
    #[error("bin {0} out of range")]
    BinOutOfRange(usize),
    #[error("prediction has zero norm")]
    DegenerateDirection,
    #[error("non-finite input")]
    NonFinite,
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
}

/// Loss value and gradient with respect to the prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub value: f64,
    pub grad: Vec<f64>,
}

impl LossGrad {
    pub fn new(value: f64, grad: Vec<f64>) -> Self {
        Self { value, grad }
    }
}

/// Per-class azimuth logits laid out as `C` consecutive blocks of 360.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseLogits {
    values: Vec<f64>,
    foreground_class: usize,
}

impl PoseLogits {
    pub fn new(values: Vec<f64>, foreground_class: usize) -> Result<Self, LossError> {
        if values.is_empty() || !values.len().is_multiple_of(POSE_BINS) {
            return Err(LossError::BadLayout(values.len()));
        }
        let classes = values.len() / POSE_BINS;
        if foreground_class >= classes {
            return Err(LossError::MaskingViolation {
                class: foreground_class,
                classes,
            });
        }
        Ok(Self {
            values,
            foreground_class,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.values.len() / POSE_BINS
    }

    pub fn foreground_class(&self) -> usize {
        self.foreground_class
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn block_range(&self) -> std::ops::Range<usize> {
        let start = self.foreground_class * POSE_BINS;
        start..start + POSE_BINS
    }

    /// Arg-max slot inside the foreground block.
    pub fn predicted_bin(&self) -> usize {
        let block = &self.values[self.block_range()];
        let mut best = 0;
        for (i, v) in block.iter().enumerate() {
            if *v > block[best] {
                best = i;
            }
        }
        best
    }
}

/// Discrete (one of 360 slots) or continuous pose target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PoseTarget {
    Angle(Angle),
    Bin(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseLabel {
    pub class: usize,
    pub target: PoseTarget,
}

impl PoseLabel {
    pub fn continuous(class: usize, angle: Angle) -> Self {
        Self {
            class,
            target: PoseTarget::Angle(angle),
        }
    }

    pub fn discrete(class: usize, bin: usize) -> Self {
        Self {
            class,
            target: PoseTarget::Bin(bin),
        }
    }

    fn angle(&self) -> Result<Angle, LossError> {
        match self.target {
            PoseTarget::Angle(a) => Ok(a),
            PoseTarget::Bin(_) => Err(LossError::LabelMode {
                expected: "continuous",
            }),
        }
    }

    fn bin(&self) -> Result<usize, LossError> {
        match self.target {
            PoseTarget::Bin(b) if b < POSE_BINS => Ok(b),
            PoseTarget::Bin(b) => Err(LossError::BinOutOfRange(b)),
            PoseTarget::Angle(_) => Err(LossError::LabelMode { expected: "discrete" }),
        }
    }
}

/// One-degree slot of an azimuth in the 360-slot layout, starting at 0°.
pub fn degree_slot(a: Angle) -> usize {
    let deg = a.degrees().rem_euclid(360.0);
    (deg.floor() as usize).min(POSE_BINS - 1)
}

/// Raw regressor output for one angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousPrediction {
    pub point: CirclePoint,
    pub class: usize,
}

impl ContinuousPrediction {
    pub fn new(point: CirclePoint, class: usize) -> Self {
        Self { point, class }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HuberMode {
    /// Huber applied to each residual component and summed.
    #[default]
    Componentwise,
    /// Huber applied to the Euclidean norm of the residual.
    Norm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HuberParams {
    delta: f64,
    pub mode: HuberMode,
}

impl HuberParams {
    pub fn new(delta: f64, mode: HuberMode) -> Result<Self, LossError> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(LossError::InvalidParameter("huber delta must be positive"));
        }
        Ok(Self { delta, mode })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

impl Default for HuberParams {
    fn default() -> Self {
        Self {
            delta: 1.0,
            mode: HuberMode::Componentwise,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_cls: f64,
    pub lambda_bbox: f64,
    pub lambda_pose: f64,
}

impl LossWeights {
    pub fn new(lambda_cls: f64, lambda_bbox: f64, lambda_pose: f64) -> Result<Self, LossError> {
        let all = [lambda_cls, lambda_bbox, lambda_pose];
        if all.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(LossError::InvalidParameter("loss weights must be finite and non-negative"));
        }
        if all.iter().all(|l| *l == 0.0) {
            return Err(LossError::InvalidParameter("at least one loss weight must be positive"));
        }
        Ok(Self {
            lambda_cls,
            lambda_bbox,
            lambda_pose,
        })
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_cls: 1.0,
            lambda_bbox: 1.0,
            lambda_pose: 1.0,
        }
    }
}

fn check_finite(xs: &[f64]) -> Result<(), LossError> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(LossError::NonFinite)
    }
}

/// Softmax cross-entropy, stable in the presence of large logits.
/// Returns `(loss, softmax - onehot)`.
fn softmax_xent(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = probs.iter().sum();
    let log_sum = sum.ln() + max;
    for p in &mut probs {
        *p /= sum;
    }
    let loss = log_sum - logits[label];
    probs[label] -= 1.0;
    (loss, probs)
}

/// Cross-entropy over the 360 slots of the foreground class only.
///
/// The returned gradient spans all `360·C` logits and is exactly zero
/// outside the foreground block.
pub fn masked_softmax_xent(logits: &PoseLogits, label: &PoseLabel) -> Result<LossGrad, LossError> {
    let bin = label.bin()?;
    if label.class != logits.foreground_class {
        return Err(LossError::ClassMismatch {
            label: label.class,
            foreground: logits.foreground_class,
        });
    }
    let range = logits.block_range();
    let block = &logits.values[range.clone()];
    check_finite(block)?;
    let (loss, block_grad) = softmax_xent(block, bin);
    let mut grad = vec![0.0; logits.values.len()];
    grad[range].copy_from_slice(&block_grad);
    Ok(LossGrad::new(loss, grad))
}

fn residual(pred: &ContinuousPrediction, label: &PoseLabel) -> Result<[f64; 2], LossError> {
    check_finite(&pred.point.to_array())?;
    let target = encode(label.angle()?);
    Ok([target.s - pred.point.s, target.c - pred.point.c])
}

/// `½‖p(label) − pred‖²`.
pub fn euclidean_loss(pred: &ContinuousPrediction, label: &PoseLabel) -> Result<LossGrad, LossError> {
    let r = residual(pred, label)?;
    let value = 0.5 * (r[0] * r[0] + r[1] * r[1]);
    Ok(LossGrad::new(value, vec![-r[0], -r[1]]))
}

fn huber_scalar(r: f64, delta: f64) -> (f64, f64) {
    // returns (loss, d loss / d r)
    if r.abs() <= delta {
        (0.5 * r * r, r)
    } else {
        (delta * r.abs() - 0.5 * delta * delta, delta * r.signum())
    }
}

pub fn huber_loss(
    pred: &ContinuousPrediction,
    label: &PoseLabel,
    params: &HuberParams,
) -> Result<LossGrad, LossError> {
    let r = residual(pred, label)?;
    let delta = params.delta;
    match params.mode {
        HuberMode::Componentwise => {
            let (l0, d0) = huber_scalar(r[0], delta);
            let (l1, d1) = huber_scalar(r[1], delta);
            // r = target - pred, so d/dpred = -d/dr
            Ok(LossGrad::new(l0 + l1, vec![-d0, -d1]))
        }
        HuberMode::Norm => {
            let n = r[0].hypot(r[1]);
            if n <= delta {
                Ok(LossGrad::new(0.5 * n * n, vec![-r[0], -r[1]]))
            } else {
                let k = delta / n;
                Ok(LossGrad::new(delta * n - 0.5 * delta * delta, vec![-k * r[0], -k * r[1]]))
            }
        }
    }
}

/// `1 − cos∠(p(label), pred)`, in `[0, 2]`.
pub fn cyclic_cosine_loss(pred: &ContinuousPrediction, label: &PoseLabel) -> Result<LossGrad, LossError> {
    let p = pred.point;
    check_finite(&p.to_array())?;
    let t = encode(label.angle()?);
    let np = p.norm();
    if np == 0.0 {
        return Err(LossError::DegenerateDirection);
    }
    let nt = t.norm();
    let dot = t.dot(p);
    let cos = dot / (nt * np);
    // d cos / dp = t/(|t||p|) − (t·p) p/(|t||p|³)
    let a = 1.0 / (nt * np);
    let b = dot / (nt * np * np * np);
    let grad = vec![-(a * t.s - b * p.s), -(a * t.c - b * p.c)];
    Ok(LossGrad::new(1.0 - cos, grad))
}

/// Which regression loss drives a continuous pose head.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ContinuousLoss {
    Euclidean,
    Huber(HuberParams),
    CyclicCosine,
}

impl ContinuousLoss {
    pub fn evaluate(&self, pred: &ContinuousPrediction, label: &PoseLabel) -> Result<LossGrad, LossError> {
        match self {
            ContinuousLoss::Euclidean => euclidean_loss(pred, label),
            ContinuousLoss::Huber(params) => huber_loss(pred, label, params),
            ContinuousLoss::CyclicCosine => cyclic_cosine_loss(pred, label),
        }
    }
}

/// Sum of `loss` over azimuth, elevation and in-plane predictions.
/// The gradient is laid out as `[az.s, az.c, el.s, el.c, th.s, th.c]`.
pub fn pose_loss_three_angles(
    loss: &ContinuousLoss,
    preds: &[CirclePoint; 3],
    class: usize,
    label: &Pose,
) -> Result<LossGrad, LossError> {
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(6);
    for (p, a) in preds.iter().zip(label.angles()) {
        let lg = loss.evaluate(&ContinuousPrediction::new(*p, class), &PoseLabel::continuous(class, a))?;
        value += lg.value;
        grad.extend(lg.grad);
    }
    Ok(LossGrad::new(value, grad))
}

/// `½‖pred − gt‖²` over `[x1, y1, x2, y2]`.
pub fn bbox_euclidean_loss(pred_box: &[f64; 4], gt_box: &[f64; 4]) -> Result<LossGrad, LossError> {
    check_finite(pred_box)?;
    check_finite(gt_box)?;
    let grad: Vec<f64> = pred_box.iter().zip(gt_box).map(|(p, g)| p - g).collect();
    let value = 0.5 * grad.iter().map(|d| d * d).sum::<f64>();
    Ok(LossGrad::new(value, grad))
}

/// Softmax cross-entropy over the `C + 1` object classes (background included).
pub fn class_xent(logits: &[f64], label: usize) -> Result<LossGrad, LossError> {
    if label >= logits.len() {
        return Err(LossError::BinOutOfRange(label));
    }
    check_finite(logits)?;
    let (value, grad) = softmax_xent(logits, label);
    Ok(LossGrad::new(value, grad))
}

/// Per-branch losses of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LossComponents {
    pub cls: LossGrad,
    pub bbox: LossGrad,
    pub pose: LossGrad,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TotalLoss {
    pub value: f64,
    pub cls_grad: Vec<f64>,
    pub bbox_grad: Vec<f64>,
    pub pose_grad: Vec<f64>,
}

fn scaled(grad: &[f64], lambda: f64) -> Vec<f64> {
    if lambda == 0.0 {
        vec![0.0; grad.len()]
    } else {
        grad.iter().map(|g| lambda * g).collect()
    }
}

/// `λ_cls·L_cls + λ_bbox·L_bbox + λ_pose·L_pose`.
///
/// A zero weight yields an exactly zero gradient for its branch, whatever
/// the branch loss is.
pub fn total_loss(components: &LossComponents, w: &LossWeights) -> TotalLoss {
    let term = |lambda: f64, v: f64| if lambda == 0.0 { 0.0 } else { lambda * v };
    TotalLoss {
        value: term(w.lambda_cls, components.cls.value)
            + term(w.lambda_bbox, components.bbox.value)
            + term(w.lambda_pose, components.pose.value),
        cls_grad: scaled(&components.cls.grad, w.lambda_cls),
        bbox_grad: scaled(&components.bbox.grad, w.lambda_bbox),
        pose_grad: scaled(&components.pose.grad, w.lambda_pose),
    }
}

/// Rescales `grad` to norm `threshold` if it is longer; direction is kept.
pub fn clip_gradient(grad: &[f64], threshold: f64) -> Result<Vec<f64>, LossError> {
    if !(threshold > 0.0 && threshold.is_finite()) {
        return Err(LossError::InvalidParameter("clip threshold must be positive"));
    }
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > threshold {
        let k = threshold / norm;
        Ok(grad.iter().map(|g| g * k).collect())
    } else {
        Ok(grad.to_vec())
    }
}

/// Averages per-sample results: mean loss, and each sample's gradient
/// divided by the batch size.
pub fn batch_mean(samples: Vec<LossGrad>) -> (f64, Vec<Vec<f64>>) {
    if samples.is_empty() {
        return (0.0, Vec::new());
    }
    let n = samples.len() as f64;
    let value = samples.iter().map(|s| s.value).sum::<f64>() / n;
    let grads = samples
        .into_iter()
        .map(|s| s.grad.into_iter().map(|g| g / n).collect())
        .collect();
    (value, grads)
}

/// Default central-difference step.
pub const GRADIENT_CHECK_STEP: f64 = 1e-6;

/// Worst relative error between the analytic gradient of `loss_fn` at
/// `point` and central differences with the given step. The denominator is
/// `max(1, |analytic|)`.
pub fn check_gradient<F>(loss_fn: F, point: &[f64], step: f64) -> f64
where
    F: Fn(&[f64]) -> LossGrad,
{
    let analytic = loss_fn(point).grad;
    assert_eq!(analytic.len(), point.len(), "gradient length must match the point");
    let mut x = point.to_vec();
    let mut worst = 0.0_f64;
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + step;
        let plus = loss_fn(&x).value;
        x[i] = orig - step;
        let minus = loss_fn(&x).value;
        x[i] = orig;
        let numeric = (plus - minus) / (2.0 * step);
        let err = (numeric - analytic[i]).abs() / analytic[i].abs().max(1.0);
        worst = worst.max(err);
    }
    worst
}
