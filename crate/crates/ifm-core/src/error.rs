//! Crate-wide error type and exit-code mapping.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IfmError {
    /// Invalid arguments or configuration supplied by the caller.
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed or inconsistent input data.
    #[error("data error: {0}")]
    Data(String),

    /// Parse failure in an input file, with location context.
    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    /// Wrist speed never exceeded the threshold.
    #[error("no movement detected in trial '{trial_id}' (speed never exceeded threshold)")]
    NoMovement { trial_id: String },

    /// Collinear or otherwise degenerate marker configuration.
    #[error("degenerate marker configuration at sample {sample}: condition {condition:.3e}")]
    DegenerateFrame { sample: usize, condition: f64 },

    /// Kernel normalizer collapsed to zero (all training histograms identical).
    #[error("degenerate kernel: channel {channel} has zero mean chi-square distance")]
    DegenerateKernel { channel: String },

    /// Optimizer failed to reach the requested tolerance.
    #[error("solver did not converge: KKT violation {violation:.3e} after {iterations} iterations")]
    NonConvergence { violation: f64, iterations: usize },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl IfmError {
    pub fn config(msg: impl Into<String>) -> Self {
        IfmError::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        IfmError::Data(msg.into())
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        IfmError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 1 usage, 2 data/validation, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            IfmError::Config(_) => 1,
            IfmError::NonConvergence { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, IfmError>;
