use std::path::PathBuf;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {what}: {source}")]
    Parse {
        what: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("dimension mismatch in {field}: {detail}")]
    Dimension { field: String, detail: String },

    #[error("D·Dᵀ singular at node {node}")]
    SingularNoise { node: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("improper G: numerator degree {num_deg} exceeds denominator degree {den_deg}")]
    ImproperTransfer { num_deg: usize, den_deg: usize },

    #[error("degenerate bias model: {0}")]
    DegenerateBias(String),

    #[error("not square-integrable: {0}")]
    NotL2(String),

    #[error("no stabilizing Riccati solution: {0}")]
    NoStabilizingSolution(String),

    #[error("{layer} layer infeasible at gamma^2 = {gamma2:e}: {reason}")]
    Infeasible {
        layer: String,
        gamma2: f64,
        reason: String,
    },

    #[error("numerical divergence at t = {time} (step {step}): state component {component} = {value:e}")]
    Divergence {
        time: f64,
        step: usize,
        component: usize,
        value: f64,
    },

    #[error("gain file does not match scenario (expected hash {expected}, found {found})")]
    HashMismatch { expected: String, found: String },

    #[error("no admissible graph among {candidates} candidates")]
    NoAdmissibleGraph { candidates: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(field: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Dimension {
            field: field.into(),
            detail: detail.into(),
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Infeasible { .. }
            | Error::NoStabilizingSolution(_)
            | Error::NoAdmissibleGraph { .. } => 2,
            Error::Divergence { .. } => 4,
            _ => 3,
        }
    }
}
