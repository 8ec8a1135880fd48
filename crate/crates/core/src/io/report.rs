use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;

use super::IoError;
use crate::metrics::{EvalConfig, EvalReport, MetricsError, PrCurve};

pub const TOOL_NAME: &str = "posebench";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub sha256: String,
    pub records: usize,
}

impl InputDigest {
    pub fn of(bytes: &[u8], records: usize) -> Self {
        Self {
            sha256: sha256_hex(bytes),
            records,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportInputs {
    pub gt: InputDigest,
    pub det: InputDigest,
}

/// Evaluation output as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub tool: String,
    pub version: String,
    pub config: EvalConfig,
    pub inputs: ReportInputs,
    pub report: EvalReport,
}

impl ReportFile {
    pub fn new(config: EvalConfig, gt: InputDigest, det: InputDigest, report: EvalReport) -> Self {
        Self {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            config,
            inputs: ReportInputs { gt, det },
            report,
        }
    }

    /// Pretty JSON with a trailing newline. Fails if the report is not
    /// self-consistent.
    pub fn render(&self) -> Result<String, ReportError> {
        self.report.check_consistency()?;
        let mut s = serde_json::to_string_pretty(self).map_err(IoError::from)?;
        s.push('\n');
        Ok(s)
    }

    pub fn parse(text: &str) -> Result<Self, IoError> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    Invariant(#[from] MetricsError),
    #[error(transparent)]
    Io(#[from] IoError),
}

/// `rank,score,recall,precision,envelope`, one row per ranked detection.
pub fn curve_csv(curve: &PrCurve) -> String {
    let env = curve.envelope();
    let mut out = String::from("rank,score,recall,precision,envelope\n");
    let rows = curve.scores.iter().zip(&curve.recall).zip(&curve.precision).zip(&env);
    for (i, (((s, r), p), e)) in rows.enumerate() {
        let _ = writeln!(out, "{},{s},{r},{p},{e}", i + 1);
    }
    out
}
