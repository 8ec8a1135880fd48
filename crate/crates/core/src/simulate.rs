//! Synthetic ground truth and detector output with controllable
//! localization, scoring and viewpoint error models.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`) seeded with the scenario
//! seed, using three independent streams: 0 for ground truth, 1 for
//! localization and scores, 2 for viewpoint errors. Normal deviates are
//! `rand_distr::StandardNormal`. Keeping the streams apart means two
//! scenarios that differ only in their pose error model share the same
//! objects, boxes and scores. All angle arithmetic is in degrees so the
//! generated records are exactly what the file readers return.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::io::{wrap_degrees, DetRecord, GtRecord};

pub const GENERATOR_NAME: &str = "chacha8 (rand_chacha 0.9) streams gt=0 loc=1 pose=2; normal=rand_distr 0.5 StandardNormal";

const STREAM_GT: u64 = 0;
const STREAM_LOC: u64 = 1;
const STREAM_POSE: u64 = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountRange {
    pub min: usize,
    pub max: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeRange {
    pub min: f64,
    pub max: f64,
}

/// Detection confidence: true-positive candidates score higher on average
/// than spurious detections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreModel {
    pub tp_mean: f64,
    pub tp_std: f64,
    pub fp_mean: f64,
    pub fp_std: f64,
}

impl Default for ScoreModel {
    fn default() -> Self {
        Self {
            tp_mean: 0.8,
            tp_std: 0.1,
            fp_mean: 0.4,
            fp_std: 0.15,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LocalizationNoise {
    /// Std. dev. of the box center shift, as a fraction of box size.
    pub center_jitter: f64,
    /// Std. dev. of the log size factor.
    pub size_jitter: f64,
    /// Probability that an object gets no detection.
    pub miss_rate: f64,
    /// Probability, per object, of an extra detection at a random place.
    pub fp_rate: f64,
}

/// How predicted azimuths deviate from the ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PoseErrorModel {
    /// Wrapped Gaussian around the true azimuth.
    GaussianNearby { sigma_deg: f64 },
    /// With probability `p_flip` the azimuth is turned around by 180°,
    /// then wrapped Gaussian noise is added.
    OppositeFlip { p_flip: f64, sigma_deg: f64 },
    /// Pulled a fraction `pull_strength` of the way towards `bias_deg`
    /// along the shorter arc, then wrapped Gaussian noise is added.
    BiasAttractor { bias_deg: f64, pull_strength: f64, sigma_deg: f64 },
}

impl PoseErrorModel {
    pub fn exact() -> Self {
        PoseErrorModel::GaussianNearby { sigma_deg: 0.0 }
    }

    fn validate(&self) -> Result<(), SimError> {
        let (sigma, p) = match *self {
            PoseErrorModel::GaussianNearby { sigma_deg } => (sigma_deg, 0.0),
            PoseErrorModel::OppositeFlip { p_flip, sigma_deg } => (sigma_deg, p_flip),
            PoseErrorModel::BiasAttractor { bias_deg, pull_strength, sigma_deg } => {
                if !bias_deg.is_finite() {
                    return Err(SimError::InvalidConfig("bias_deg must be finite".into()));
                }
                (sigma_deg, pull_strength)
            }
        };
        check_rate("pose error probability/pull", p)?;
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(SimError::InvalidConfig("sigma_deg must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Predicted azimuth in degrees. Always consumes the same number of
    /// random draws, so streams stay aligned across models.
    fn predict(&self, gt_deg: f64, rng: &mut ChaCha8Rng) -> f64 {
        let u: f64 = rng.random();
        let z: f64 = rng.sample(StandardNormal);
        match *self {
            PoseErrorModel::GaussianNearby { sigma_deg } => wrap_degrees(gt_deg + sigma_deg * z),
            PoseErrorModel::OppositeFlip { p_flip, sigma_deg } => {
                let flip = if u < p_flip { 180.0 } else { 0.0 };
                wrap_degrees(gt_deg + flip + sigma_deg * z)
            }
            PoseErrorModel::BiasAttractor {
                bias_deg,
                pull_strength,
                sigma_deg,
            } => {
                let towards = wrap_degrees(bias_deg - gt_deg);
                wrap_degrees(gt_deg + pull_strength * towards + sigma_deg * z)
            }
        }
    }
}

/// Distribution of ground-truth azimuths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AzimuthPrior {
    Uniform,
    /// With probability `weight`, a wrapped Gaussian around `bias_deg`;
    /// otherwise uniform.
    Concentrated { bias_deg: f64, sigma_deg: f64, weight: f64 },
}

impl AzimuthPrior {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let u: f64 = rng.random();
        let uniform: f64 = rng.random_range(-180.0..180.0);
        let z: f64 = rng.sample(StandardNormal);
        match *self {
            AzimuthPrior::Uniform => uniform,
            AzimuthPrior::Concentrated { bias_deg, sigma_deg, weight } => {
                if u < weight {
                    wrap_degrees(bias_deg + sigma_deg * z)
                } else {
                    uniform
                }
            }
        }
    }
}

fn default_image_size() -> [f64; 2] {
    [640.0, 480.0]
}

fn default_box_size() -> SizeRange {
    SizeRange { min: 40.0, max: 200.0 }
}

fn default_elevation() -> [f64; 2] {
    [-10.0, 30.0]
}

fn check_rate(name: &str, p: f64) -> Result<(), SimError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(SimError::InvalidConfig(format!("{name} must be in [0, 1], got {p}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub n_images: usize,
    pub objects_per_image: CountRange,
    pub classes: Vec<String>,
    #[serde(default = "default_image_size")]
    pub image_size: [f64; 2],
    #[serde(default = "default_box_size")]
    pub box_size: SizeRange,
    #[serde(default)]
    pub difficult_rate: f64,
    #[serde(default)]
    pub score_model: ScoreModel,
    #[serde(default)]
    pub localization: LocalizationNoise,
    pub pose_error: PoseErrorModel,
    pub azimuth_prior: AzimuthPrior,
    /// Uniform range of ground-truth elevations, degrees.
    #[serde(default = "default_elevation")]
    pub elevation_range_deg: [f64; 2],
    /// Std. dev. of ground-truth in-plane rotation, degrees.
    #[serde(default)]
    pub inplane_sigma_deg: f64,
    /// Std. dev. of the error on predicted elevation and in-plane angles.
    #[serde(default)]
    pub secondary_sigma_deg: f64,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.classes.is_empty() || self.classes.iter().any(|c| c.is_empty()) {
            return Err(SimError::InvalidConfig("classes must be nonempty names".into()));
        }
        if self.objects_per_image.min > self.objects_per_image.max {
            return Err(SimError::InvalidConfig("objects_per_image.min exceeds max".into()));
        }
        let [w, h] = self.image_size;
        let sz = self.box_size;
        if !(sz.min > 0.0 && sz.min <= sz.max && sz.max < w.min(h)) {
            return Err(SimError::InvalidConfig("box_size must satisfy 0 < min <= max < image size".into()));
        }
        check_rate("difficult_rate", self.difficult_rate)?;
        check_rate("localization.miss_rate", self.localization.miss_rate)?;
        check_rate("localization.fp_rate", self.localization.fp_rate)?;
        let s = &self.score_model;
        let l = &self.localization;
        let nonneg = [
            s.tp_std,
            s.fp_std,
            l.center_jitter,
            l.size_jitter,
            self.inplane_sigma_deg,
            self.secondary_sigma_deg,
        ];
        if nonneg.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || !s.tp_mean.is_finite() || !s.fp_mean.is_finite() {
            return Err(SimError::InvalidConfig("noise parameters must be finite and non-negative".into()));
        }
        let [e0, e1] = self.elevation_range_deg;
        if !(e0.is_finite() && e1.is_finite() && e0 <= e1) {
            return Err(SimError::InvalidConfig("elevation_range_deg must be an ordered pair".into()));
        }
        if let AzimuthPrior::Concentrated { weight, sigma_deg, bias_deg } = self.azimuth_prior {
            check_rate("azimuth_prior.weight", weight)?;
            if !(sigma_deg.is_finite() && sigma_deg >= 0.0 && bias_deg.is_finite()) {
                return Err(SimError::InvalidConfig("azimuth_prior parameters must be finite".into()));
            }
        }
        self.pose_error.validate()
    }

    /// Every object detected exactly, no spurious detections.
    pub fn zero_noise(seed: u64) -> Self {
        Self {
            n_images: 20,
            objects_per_image: CountRange { min: 1, max: 3 },
            classes: vec!["bus".into(), "car".into()],
            image_size: default_image_size(),
            box_size: default_box_size(),
            difficult_rate: 0.0,
            score_model: ScoreModel::default(),
            localization: LocalizationNoise::default(),
            pose_error: PoseErrorModel::exact(),
            azimuth_prior: AzimuthPrior::Uniform,
            elevation_range_deg: default_elevation(),
            inplane_sigma_deg: 5.0,
            secondary_sigma_deg: 0.0,
            seed,
        }
    }

    /// Header written as the first line of generated files.
    pub fn fixture_header(&self) -> Value {
        json!({
            "generator": GENERATOR_NAME,
            "seed": self.seed,
            "tool": format!("posebench {}", env!("CARGO_PKG_VERSION")),
        })
    }
}

/// Generated ground truth and detections, as file records.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedData {
    pub gt: Vec<GtRecord>,
    pub det: Vec<DetRecord>,
}

/// Nearest double to `x` rounded to `digits` decimals, so files hold
/// short decimal strings.
fn round_to(x: f64, digits: i32) -> f64 {
    let scale = 10f64.powi(digits);
    (x * scale).round() / scale
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// A detection before its viewpoint is drawn.
struct Candidate {
    image: String,
    class: String,
    bbox: [f64; 4],
    score: f64,
    source: Option<usize>,
}

fn sample_ground_truth(cfg: &ScenarioConfig) -> Vec<GtRecord> {
    let mut rng = stream(cfg.seed, STREAM_GT);
    let [w, h] = cfg.image_size;
    let mut out = Vec::new();
    for img in 0..cfg.n_images {
        let image = format!("img{img:05}");
        let n = rng.random_range(cfg.objects_per_image.min..=cfg.objects_per_image.max);
        for _ in 0..n {
            let class = cfg.classes[rng.random_range(0..cfg.classes.len())].clone();
            let bw = rng.random_range(cfg.box_size.min..=cfg.box_size.max);
            let bh = rng.random_range(cfg.box_size.min..=cfg.box_size.max);
            let x1 = round_to(rng.random_range(0.0..(w - bw)), 2);
            let y1 = round_to(rng.random_range(0.0..(h - bh)), 2);
            let bbox = [x1, y1, round_to(x1 + bw, 2), round_to(y1 + bh, 2)];
            let az = round_to(cfg.azimuth_prior.sample(&mut rng), 4);
            let [e0, e1] = cfg.elevation_range_deg;
            let el: f64 = rng.random();
            let el = round_to(e0 + (e1 - e0) * el, 4);
            let z: f64 = rng.sample(StandardNormal);
            let th = round_to(wrap_degrees(cfg.inplane_sigma_deg * z), 4);
            let difficult_u: f64 = rng.random();
            let difficult = difficult_u < cfg.difficult_rate;
            out.push(GtRecord::new(
                image.clone(),
                class,
                [bbox[0], bbox[1], bbox[2], bbox[3]],
                [wrap_degrees(az), el, wrap_degrees(th)],
                difficult,
            ));
        }
    }
    out
}

fn jitter_box(b: [f64; 4], loc: &LocalizationNoise, rng: &mut ChaCha8Rng) -> [f64; 4] {
    let (w, h) = (b[2] - b[0], b[3] - b[1]);
    let zs: [f64; 4] = [
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    ];
    let dx = loc.center_jitter * w * zs[0];
    let dy = loc.center_jitter * h * zs[1];
    let gw = w * (loc.size_jitter * zs[2]).exp() - w;
    let gh = h * (loc.size_jitter * zs[3]).exp() - h;
    [
        round_to(b[0] + dx - 0.5 * gw, 2),
        round_to(b[1] + dy - 0.5 * gh, 2),
        round_to(b[2] + dx + 0.5 * gw, 2),
        round_to(b[3] + dy + 0.5 * gh, 2),
    ]
}

fn sample_candidates(cfg: &ScenarioConfig, gt: &[GtRecord]) -> Vec<Candidate> {
    let mut rng = stream(cfg.seed, STREAM_LOC);
    let [w, h] = cfg.image_size;
    let sm = &cfg.score_model;
    let mut out = Vec::new();
    for (i, g) in gt.iter().enumerate() {
        let miss: f64 = rng.random();
        let spurious: f64 = rng.random();
        let tp_z: f64 = rng.sample(StandardNormal);
        let fp_z: f64 = rng.sample(StandardNormal);
        let bbox = jitter_box(g.bbox, &cfg.localization, &mut rng);
        let bw = rng.random_range(cfg.box_size.min..=cfg.box_size.max);
        let bh = rng.random_range(cfg.box_size.min..=cfg.box_size.max);
        let fx: f64 = rng.random_range(0.0..(w - bw));
        let fy: f64 = rng.random_range(0.0..(h - bh));
        let fp_class = cfg.classes[rng.random_range(0..cfg.classes.len())].clone();

        // a degenerate jitter result counts as a miss
        if miss >= cfg.localization.miss_rate && bbox[0] < bbox[2] && bbox[1] < bbox[3] {
            out.push(Candidate {
                image: g.image.clone(),
                class: g.class.clone(),
                bbox,
                score: sm.tp_mean + sm.tp_std * tp_z,
                source: Some(i),
            });
        }
        if spurious < cfg.localization.fp_rate {
            let x1 = round_to(fx, 2);
            let y1 = round_to(fy, 2);
            out.push(Candidate {
                image: g.image.clone(),
                class: fp_class,
                bbox: [x1, y1, round_to(x1 + bw, 2), round_to(y1 + bh, 2)],
                score: sm.fp_mean + sm.fp_std * fp_z,
                source: None,
            });
        }
    }
    out
}

fn assign_poses(cfg: &ScenarioConfig, model: &PoseErrorModel, gt: &[GtRecord], cands: &[Candidate]) -> Vec<DetRecord> {
    let mut rng = stream(cfg.seed, STREAM_POSE);
    cands
        .iter()
        .map(|c| {
            let az_fp: f64 = rng.random_range(-180.0..180.0);
            let z_el: f64 = rng.sample(StandardNormal);
            let z_th: f64 = rng.sample(StandardNormal);
            let pose = match c.source {
                Some(i) => {
                    let g = &gt[i];
                    let (az, el, th) = (
                        g.azimuth_deg.unwrap_or(0.0),
                        g.elevation_deg.unwrap_or(0.0),
                        g.theta_deg.unwrap_or(0.0),
                    );
                    let s = cfg.secondary_sigma_deg;
                    [
                        round_to(model.predict(az, &mut rng), 4),
                        round_to(wrap_degrees(el + s * z_el), 4),
                        round_to(wrap_degrees(th + s * z_th), 4),
                    ]
                }
                None => {
                    // keep the draw count identical to the matched branch
                    let _ = model.predict(0.0, &mut rng);
                    [round_to(az_fp, 4), 0.0, 0.0]
                }
            };
            let pose = pose.map(wrap_degrees);
            DetRecord::new(c.image.clone(), c.class.clone(), c.bbox, c.score, pose)
        })
        .collect()
}

/// Ground truth and detections for `config`, deterministic in its seed.
pub fn generate(config: &ScenarioConfig) -> Result<SimulatedData, SimError> {
    config.validate()?;
    let gt = sample_ground_truth(config);
    let cands = sample_candidates(config, &gt);
    let det = assign_poses(config, &config.pose_error, &gt, &cands);
    Ok(SimulatedData { gt, det })
}

/// Two detection sets over shared ground truth, boxes and scores; only the
/// viewpoint error model differs.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedScenario {
    pub gt: Vec<GtRecord>,
    pub first: Vec<DetRecord>,
    pub second: Vec<DetRecord>,
}

pub fn generate_pair(
    config: &ScenarioConfig,
    first: &PoseErrorModel,
    second: &PoseErrorModel,
) -> Result<PairedScenario, SimError> {
    config.validate()?;
    first.validate()?;
    second.validate()?;
    let gt = sample_ground_truth(config);
    let cands = sample_candidates(config, &gt);
    Ok(PairedScenario {
        first: assign_poses(config, first, &gt, &cands),
        second: assign_poses(config, second, &gt, &cands),
        gt,
    })
}

/// Settings of the discrete-vs-continuous comparison: a single class whose
/// views concentrate around the frontal direction.
pub fn discrete_vs_continuous_config(seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        n_images: 600,
        objects_per_image: CountRange { min: 1, max: 2 },
        classes: vec!["bus".into()],
        image_size: default_image_size(),
        box_size: default_box_size(),
        difficult_rate: 0.05,
        score_model: ScoreModel::default(),
        localization: LocalizationNoise {
            center_jitter: 0.05,
            size_jitter: 0.05,
            miss_rate: 0.1,
            fp_rate: 0.15,
        },
        pose_error: PoseErrorModel::exact(),
        azimuth_prior: AzimuthPrior::Concentrated {
            bias_deg: 0.0,
            sigma_deg: 30.0,
            weight: 0.6,
        },
        elevation_range_deg: default_elevation(),
        inplane_sigma_deg: 0.0,
        secondary_sigma_deg: 0.0,
        seed,
    }
}

/// Classifier-like errors: mostly right, sometimes flipped front-to-back.
pub const DISCRETE_LIKE: PoseErrorModel = PoseErrorModel::OppositeFlip {
    p_flip: 0.2,
    sigma_deg: 4.0,
};

/// Regressor-like errors: smooth, pulled towards the dominant view.
pub const CONTINUOUS_LIKE: PoseErrorModel = PoseErrorModel::BiasAttractor {
    bias_deg: 0.0,
    pull_strength: 0.3,
    sigma_deg: 18.0,
};

/// `first` holds the discrete-like detections, `second` the
/// continuous-like ones.
pub fn scenario_discrete_vs_continuous(seed: u64) -> Result<PairedScenario, SimError> {
    generate_pair(&discrete_vs_continuous_config(seed), &DISCRETE_LIKE, &CONTINUOUS_LIKE)
}
