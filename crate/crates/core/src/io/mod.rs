//! File formats: JSON-lines inputs, the evaluation report, and CSV/SVG
//! figure output.

pub mod records;
pub mod report;
pub mod svg;

use std::path::Path;

use thiserror::Error;

pub use records::{
    det_to_domain, gt_to_domain, load_det, load_gt, parse_det, parse_gt, save_jsonl, to_jsonl, wrap_degrees,
    AngleRequirement, DetRecord, GtRecord,
};
pub use report::{curve_csv, sha256_hex, InputDigest, ReportFile};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}{}: {message}", field.as_ref().map(|f| format!(", field `{f}`")).unwrap_or_default())]
    Parse {
        line: usize,
        field: Option<String>,
        message: String,
    },
    #[error("{path}: {inner}")]
    InFile { path: String, inner: Box<IoError> },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl IoError {
    pub(crate) fn field(line: usize, field: &str, message: impl Into<String>) -> Self {
        IoError::Parse {
            line,
            field: Some(field.to_string()),
            message: message.into(),
        }
    }

    pub(crate) fn in_file(self, path: &Path) -> Self {
        match self {
            e @ IoError::Io { .. } => e,
            other => IoError::InFile {
                path: path.display().to_string(),
                inner: Box::new(other),
            },
        }
    }

    /// Parse error location, looking through file context.
    pub fn parse_location(&self) -> Option<(usize, Option<&str>)> {
        match self {
            IoError::Parse { line, field, .. } => Some((*line, field.as_deref())),
            IoError::InFile { inner, .. } => inner.parse_location(),
            _ => None,
        }
    }
}
