use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// A single invariant violation found while validating a configuration.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Violation {
    /// Dotted path of the offending field, e.g. `device.optical.kappa_e_hz`.
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("inconsistent sideband asymmetry: blue rate {blue} must exceed red rate {red}")]
    InconsistentAsymmetry { red: f64, blue: f64 },

    #[error("rank-deficient fit: {0}")]
    RankDeficient(String),

    #[error("fit did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("sign convention error: {0}")]
    SignConvention(String),

    #[error("value {value:.6e} outside table span [{min:.6e}, {max:.6e}]")]
    OutOfRange { value: f64, min: f64, max: f64 },

    #[error("jitter model is not calibrated: {0}")]
    Uncalibrated(String),

    #[error("efficiency budget stage `{stage}` is incomplete: {reason}")]
    MissingStage { stage: String, reason: String },

    #[error("{} validation error(s):\n{}", .0.len(), format_violations(.0))]
    Validation(Vec<Violation>),

    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: row {row}: {message}")]
    Row {
        path: String,
        row: usize,
        message: String,
    },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| format!("  - {x}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Process exit status used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NotConverged { .. } => 4,
            Error::Io { .. } => 5,
            _ => 3,
        }
    }
}

pub(crate) fn require_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be finite and > 0, got {value}")))
    }
}

pub(crate) fn require_finite(name: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must be finite, got {value}")))
    }
}
