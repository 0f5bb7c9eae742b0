use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, AfdmError>;

#[derive(Debug, Error)]
pub enum AfdmError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("path delay {delay} exceeds prefix length {l_cpp}")]
    DelayExceedsPrefix { delay: usize, l_cpp: usize },

    #[error("integer-mapping mode required (2N*c1 = {two_n_c1}) and no band half-width given")]
    NotIntegerMapping { two_n_c1: f64 },

    #[error("ambiguous offset {offset}: matches (l={l_a}, k={k_a}) and (l={l_b}, k={k_b})")]
    AmbiguousOffset {
        offset: i64,
        l_a: usize,
        k_a: i64,
        l_b: usize,
        k_b: i64,
    },

    #[error("no path response above threshold {threshold:e}")]
    NoDetection { threshold: f64 },

    #[error("matrix is singular or ill-conditioned (condition number {condition:e})")]
    Singular { condition: f64 },

    #[error("ML enumeration of {candidates} candidates exceeds the 2^20 bound")]
    EnumerationBound { candidates: f64 },

    #[error("capacity exceeded: plan needs {required} indices but frame has {available} (short by {})", required - available)]
    CapacityExceeded { required: usize, available: usize },

    #[error("zero-energy reference matrix")]
    ZeroEnergy,

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl AfdmError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AfdmError::Io {
            path: path.into(),
            source,
        }
    }
}
