//! Command-line surface: `eval`, `curves`, `confusion`, `losscheck` and
//! `simulate`.
//!
//! Exit codes: 0 on success, 1 when inputs, flags or a check fail, 2 when
//! a computed report breaks its own consistency checks.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::confusion::breakdown_all;
use crate::geometry::{encode, Angle, CirclePoint, ViewBinning};
use crate::io::report::ReportError;
use crate::io::svg::{confusion_svg, pr_curves_svg};
use crate::io::{
    curve_csv, det_to_domain, gt_to_domain, load_det, load_gt, save_jsonl, AngleRequirement, DetRecord, GtRecord,
    InputDigest, ReportFile,
};
use crate::losses::{
    bbox_euclidean_loss, check_gradient, class_xent, cyclic_cosine_loss, euclidean_loss, huber_loss,
    masked_softmax_xent, ContinuousPrediction, HuberMode, HuberParams, LossGrad, PoseLabel, PoseLogits, POSE_BINS,
};
use crate::metrics::{
    evaluate, match_all, ApInterpolation, EvalConfig, IouCriterion, IouRule, Metric, PoseMode, PrCurve, Scoring,
};
use crate::simulate::{generate, ScenarioConfig};

pub const SEED_ENV: &str = "POSEBENCH_SEED";

/// Relative gradient error at or above which `losscheck` fails.
pub const GRADIENT_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Parser)]
#[command(name = "posebench", version, about = "Joint detection and viewpoint evaluation toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate detections against ground truth and write a JSON report.
    Eval(EvalArgs),
    /// Plot the precision-recall envelope of one class (SVG, with a CSV twin).
    Curves(CurvesArgs),
    /// Break viewpoint errors of true positives down by category and sector.
    Confusion(ConfusionArgs),
    /// Compare analytic loss gradients with central differences.
    Losscheck(LosscheckArgs),
    /// Generate a synthetic ground-truth and detection pair.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PoseModeArg {
    Discrete,
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Ap,
    Avp,
    Aos,
    Avp3d,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IouRuleArg {
    Geq,
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InterpArg {
    Allpoint,
    #[value(name = "11point")]
    ElevenPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CurveMetricArg {
    Avp,
    Aos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Xent,
    Euclidean,
    Huber,
    Cyclic,
    ClassXent,
    Bbox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HuberModeArg {
    Componentwise,
    Norm,
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub det: PathBuf,
    #[arg(long, value_enum, default_value = "discrete")]
    pub pose_mode: PoseModeArg,
    #[arg(long, value_enum, default_value = "geq")]
    pub iou_rule: IouRuleArg,
    #[arg(long, default_value_t = 0.5)]
    pub iou_threshold: f64,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_delimiter = ',', default_value = "4,8,16,24")]
    pub views: Vec<u32>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "ap,avp,aos")]
    pub metrics: Vec<MetricArg>,
    #[arg(long, value_enum, default_value = "allpoint")]
    pub ap_interp: InterpArg,
    /// Report path; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CurvesArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long)]
    pub class: String,
    #[arg(long, value_enum, default_value = "avp")]
    pub metric: CurveMetricArg,
    #[arg(long, default_value_t = 8)]
    pub views: u32,
    /// `.svg` (a `.csv` twin is written next to it) or `.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ConfusionArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value_t = 8)]
    pub views: u32,
    /// `.svg` (a `.csv` twin is written next to it) or `.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct LosscheckArgs {
    #[arg(long, value_enum)]
    pub loss: LossArg,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub step: f64,
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    #[arg(long, value_enum, default_value = "componentwise")]
    pub huber_mode: HuberModeArg,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Scenario JSON file.
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_gt: PathBuf,
    #[arg(long)]
    pub out_det: PathBuf,
}

/// Failure classes, mapped onto exit codes.
#[derive(Debug)]
pub enum CliError {
    Validation(anyhow::Error),
    Invariant(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Invariant(_) => 2,
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Validation(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(e) => write!(f, "error: {e:#}"),
            CliError::Invariant(e) => write!(f, "internal invariant violated: {e:#}"),
        }
    }
}

/// Seed precedence: explicit flag, then the environment, then `fallback`.
pub fn resolve_seed(flag: Option<u64>, env: Option<&str>, fallback: u64) -> Result<u64, CliError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match env {
        Some(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Validation(anyhow!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        None => Ok(fallback),
    }
}

fn env_seed() -> Option<String> {
    std::env::var(SEED_ENV).ok()
}

struct Loaded {
    gt: Vec<GtRecord>,
    det: Vec<DetRecord>,
    gt_digest: InputDigest,
    det_digest: InputDigest,
}

fn read_bytes(path: &Path) -> anyhow::Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_inputs(input: &InputArgs, req: AngleRequirement) -> anyhow::Result<Loaded> {
    let gt = load_gt(&input.gt)?;
    let det = load_det(&input.det)?;
    for r in &gt {
        r.require_angles(req).map_err(|e| anyhow!("{}: {e}", input.gt.display()))?;
    }
    for r in &det {
        r.require_angles(req).map_err(|e| anyhow!("{}: {e}", input.det.display()))?;
    }
    let gt_digest = InputDigest::of(&read_bytes(&input.gt)?, gt.len());
    let det_digest = InputDigest::of(&read_bytes(&input.det)?, det.len());
    Ok(Loaded {
        gt,
        det,
        gt_digest,
        det_digest,
    })
}

fn base_config(input: &InputArgs) -> EvalConfig {
    EvalConfig {
        pose_mode: match input.pose_mode {
            PoseModeArg::Discrete => PoseMode::Discrete,
            PoseModeArg::Continuous => PoseMode::Continuous,
        },
        iou: IouCriterion {
            threshold: input.iou_threshold,
            rule: match input.iou_rule {
                IouRuleArg::Geq => IouRule::Geq,
                IouRuleArg::Strict => IouRule::Strict,
            },
        },
        ..EvalConfig::default()
    }
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn is_svg(path: &Path) -> anyhow::Result<bool> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("svg") => Ok(true),
        Some(e) if e.eq_ignore_ascii_case("csv") => Ok(false),
        _ => bail!("--out must end in .svg or .csv: {}", path.display()),
    }
}

fn run_eval(args: &EvalArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let mut config = base_config(&args.input);
    config.views = args.views.clone();
    config.metrics = args
        .metrics
        .iter()
        .map(|m| match m {
            MetricArg::Ap => Metric::Ap,
            MetricArg::Avp => Metric::Avp,
            MetricArg::Aos => Metric::Aos,
            MetricArg::Avp3d => Metric::Avp3d,
        })
        .collect();
    config.interpolation = match args.ap_interp {
        InterpArg::Allpoint => ApInterpolation::AllPoint,
        InterpArg::ElevenPoint => ApInterpolation::ElevenPoint,
    };
    config.validate().map_err(|e| CliError::Validation(e.into()))?;

    let req = if config.metrics.contains(&Metric::Avp3d) {
        AngleRequirement::All
    } else if config.metrics.contains(&Metric::Avp) || config.metrics.contains(&Metric::Aos) {
        AngleRequirement::Azimuth
    } else {
        AngleRequirement::None
    };
    let data = load_inputs(&args.input, req)?;
    let gts = gt_to_domain(&data.gt).map_err(anyhow::Error::from)?;
    let dets = det_to_domain(&data.det).map_err(anyhow::Error::from)?;
    let report = evaluate(&dets, &gts, &config).map_err(|e| CliError::Validation(e.into()))?;
    let file = ReportFile::new(config, data.gt_digest, data.det_digest, report);
    let text = file.render().map_err(|e| match e {
        ReportError::Invariant(m) => CliError::Invariant(m.into()),
        ReportError::Io(io) => CliError::Validation(io.into()),
    })?;
    match &args.out {
        Some(path) => write_file(path, &text)?,
        None => stdout.write_all(text.as_bytes()).map_err(anyhow::Error::from)?,
    }
    Ok(())
}

fn run_curves(args: &CurvesArgs) -> Result<(), CliError> {
    let svg = is_svg(&args.out)?;
    let config = base_config(&args.input);
    let data = load_inputs(&args.input, AngleRequirement::Azimuth)?;
    let gts = gt_to_domain(&data.gt).map_err(anyhow::Error::from)?;
    let dets = det_to_domain(&data.det).map_err(anyhow::Error::from)?;
    let mut tables = match_all(&dets, &gts, &config.iou);
    let table = tables
        .remove(&args.class)
        .ok_or_else(|| anyhow!("class {:?} does not occur in the inputs", args.class))?;
    let (label, scoring) = match args.metric {
        CurveMetricArg::Avp => {
            let rule = config.pose_rule(args.views).map_err(|e| CliError::Validation(e.into()))?;
            (format!("AVP ({} views)", args.views), Scoring::Viewpoint(rule))
        }
        CurveMetricArg::Aos => ("AOS".to_string(), Scoring::Orientation),
    };
    let curve = PrCurve::from_table(&table, &scoring);
    let csv = curve_csv(&curve);
    if svg {
        let ap_curve = PrCurve::from_table(&table, &Scoring::Localization);
        let doc = pr_curves_svg(&args.class, &[("AP", &ap_curve), (label.as_str(), &curve)]);
        write_file(&args.out, &doc)?;
        write_file(&args.out.with_extension("csv"), &csv)?;
    } else {
        write_file(&args.out, &csv)?;
    }
    Ok(())
}

fn run_confusion(args: &ConfusionArgs) -> Result<(), CliError> {
    let svg = is_svg(&args.out)?;
    let config = base_config(&args.input);
    let binning = ViewBinning::with_offset(args.views, config.bin_offset, config.bin_alignment)
        .map_err(anyhow::Error::from)?;
    let data = load_inputs(&args.input, AngleRequirement::Azimuth)?;
    let gts = gt_to_domain(&data.gt).map_err(anyhow::Error::from)?;
    let dets = det_to_domain(&data.det).map_err(anyhow::Error::from)?;
    let tables = match_all(&dets, &gts, &config.iou);
    let bd = breakdown_all(tables.values(), &binning);
    if svg {
        write_file(&args.out, &confusion_svg(&bd))?;
        write_file(&args.out.with_extension("csv"), &bd.to_csv())?;
    } else {
        write_file(&args.out, &bd.to_csv())?;
    }
    Ok(())
}

/// Outcome of a randomized gradient check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheckSummary {
    pub evaluated: usize,
    /// Points dropped for lying next to the Huber kink.
    pub skipped: usize,
    pub max_rel_error: f64,
}

impl GradientCheckSummary {
    pub fn passed(&self) -> bool {
        self.max_rel_error < GRADIENT_TOLERANCE
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn random_angle(rng: &mut ChaCha8Rng) -> Angle {
    Angle::new(rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)).expect("canonical by construction")
}

fn unwrap_loss(r: Result<LossGrad, crate::losses::LossError>) -> LossGrad {
    r.expect("random trial inputs are valid")
}

/// Randomized gradient check of one loss at `trials` points.
pub fn gradient_check(
    loss: LossArg,
    trials: usize,
    step: f64,
    huber: HuberParams,
    seed: u64,
) -> GradientCheckSummary {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut summary = GradientCheckSummary {
        evaluated: 0,
        skipped: 0,
        max_rel_error: 0.0,
    };
    // margin around the kink wide enough for the finite-difference stencil
    let kink_margin = (1e3 * step).max(1e-4);
    for _ in 0..trials {
        let err = match loss {
            LossArg::Xent => {
                let classes = 2;
                let fg = rng.random_range(0..classes);
                let bin = rng.random_range(0..POSE_BINS);
                let x: Vec<f64> = (0..classes * POSE_BINS).map(|_| 2.0 * normal(&mut rng)).collect();
                let label = PoseLabel::discrete(fg, bin);
                check_gradient(
                    |v| unwrap_loss(masked_softmax_xent(&PoseLogits::new(v.to_vec(), fg).unwrap(), &label)),
                    &x,
                    step,
                )
            }
            LossArg::ClassXent => {
                let n = rng.random_range(2..=21);
                let label = rng.random_range(0..n);
                let x: Vec<f64> = (0..n).map(|_| 2.0 * normal(&mut rng)).collect();
                check_gradient(|v| unwrap_loss(class_xent(v, label)), &x, step)
            }
            LossArg::Bbox => {
                let g: [f64; 4] = std::array::from_fn(|_| 100.0 * rng.random::<f64>());
                let x: Vec<f64> = g.iter().map(|v| v + 10.0 * normal(&mut rng)).collect();
                check_gradient(
                    |v| unwrap_loss(bbox_euclidean_loss(&[v[0], v[1], v[2], v[3]], &g)),
                    &x,
                    step,
                )
            }
            LossArg::Euclidean | LossArg::Huber | LossArg::Cyclic => {
                let label = PoseLabel::continuous(0, random_angle(&mut rng));
                let radius = rng.random_range(0.5..2.0);
                let dir = encode(random_angle(&mut rng)).scale(radius);
                let x = vec![dir.s, dir.c];
                if loss == LossArg::Huber {
                    let t = encode(match label.target {
                        crate::losses::PoseTarget::Angle(a) => a,
                        crate::losses::PoseTarget::Bin(_) => unreachable!(),
                    });
                    let r = [t.s - x[0], t.c - x[1]];
                    let d = huber.delta();
                    let near = match huber.mode {
                        HuberMode::Componentwise => r.iter().any(|ri| (ri.abs() - d).abs() < kink_margin),
                        HuberMode::Norm => (r[0].hypot(r[1]) - d).abs() < kink_margin,
                    };
                    if near {
                        summary.skipped += 1;
                        continue;
                    }
                }
                let f = |v: &[f64]| {
                    let pred = ContinuousPrediction::new(CirclePoint::new(v[0], v[1]), 0);
                    unwrap_loss(match loss {
                        LossArg::Euclidean => euclidean_loss(&pred, &label),
                        LossArg::Huber => huber_loss(&pred, &label, &huber),
                        _ => cyclic_cosine_loss(&pred, &label),
                    })
                };
                check_gradient(f, &x, step)
            }
        };
        summary.evaluated += 1;
        summary.max_rel_error = summary.max_rel_error.max(err);
    }
    summary
}

fn run_losscheck(args: &LosscheckArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    if !(args.step > 0.0 && args.step.is_finite()) {
        return Err(anyhow!("--step must be positive").into());
    }
    let mode = match args.huber_mode {
        HuberModeArg::Componentwise => HuberMode::Componentwise,
        HuberModeArg::Norm => HuberMode::Norm,
    };
    let huber = HuberParams::new(args.delta, mode).map_err(anyhow::Error::from)?;
    let seed = resolve_seed(args.seed, env_seed().as_deref(), 0)?;
    let s = gradient_check(args.loss, args.trials, args.step, huber, seed);
    let name = args.loss.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
    writeln!(
        stdout,
        "{name}: {} points, {} skipped near kink, max relative error {:.3e} ({})",
        s.evaluated,
        s.skipped,
        s.max_rel_error,
        if s.passed() { "pass" } else { "FAIL" }
    )
    .map_err(anyhow::Error::from)?;
    if s.passed() {
        Ok(())
    } else {
        Err(anyhow!("max relative error {:.3e} is not below {GRADIENT_TOLERANCE:e}", s.max_rel_error).into())
    }
}

fn run_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.scenario)
        .with_context(|| format!("cannot read {}", args.scenario.display()))?;
    let mut config: ScenarioConfig =
        serde_json::from_str(&text).with_context(|| format!("{}: invalid scenario", args.scenario.display()))?;
    config.seed = resolve_seed(args.seed, env_seed().as_deref(), config.seed)?;
    let data = generate(&config).map_err(anyhow::Error::from)?;
    let meta = config.fixture_header();
    save_jsonl(&args.out_gt, &data.gt, Some(&meta)).map_err(anyhow::Error::from)?;
    save_jsonl(&args.out_det, &data.det, Some(&meta)).map_err(anyhow::Error::from)?;
    Ok(())
}

pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Eval(a) => run_eval(a, stdout),
        Command::Curves(a) => run_curves(a),
        Command::Confusion(a) => run_confusion(a),
        Command::Losscheck(a) => run_losscheck(a, stdout),
        Command::Simulate(a) => run_simulate(a),
    }
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(&cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
