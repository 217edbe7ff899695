//! Error type shared by every module of the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("graph has no nodes")]
    EmptyGraph,
    #[error("equal-neighbor weights need a regular graph (degrees range {min}..={max})")]
    NonRegularGraph { min: usize, max: usize },
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("invalid mixing matrix: {0}")]
    InvalidMixing(String),
    #[error("shift parameter tau must be positive, got {0}")]
    NonpositiveTau(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("linear system is singular or not positive definite")]
    SingularSystem,
    #[error("minibatch noise requires a logistic suite")]
    MinibatchOnQuadratic,
    #[error("smallest mixing eigenvalue {lambda_n} is not positive; use shift_mixing")]
    Assumption3Violated { lambda_n: f64 },
    #[error("stepsize {alpha} outside admissible range ({lo}, {hi}]")]
    AlphaOutOfRange { alpha: f64, lo: f64, hi: f64 },
    #[error("rate rho must lie in (0,1), got {0}")]
    InvalidRho(f64),
    #[error("matrix is not symmetric positive semidefinite")]
    NonPsdInput,
    #[error("delta {delta} outside [0, {max}]")]
    DeltaOutOfRange { delta: f64, max: f64 },
    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),
    #[error("{what} did not converge within {iters} iterations")]
    NoConvergence { what: &'static str, iters: usize },
    #[error("iteration matrix is unstable (spectral radius {0} >= 1)")]
    UnstableSpectrum(f64),
    #[error("degenerate eigenvalue {0} makes the variance formula singular")]
    DegenerateEigenvalue(f64),
    #[error("parameters outside the supported regime: {0}")]
    RegimeViolation(String),
    #[error("operation requires a quadratic suite")]
    NonQuadraticSuite,
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code: 2 for numerical failures, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NoConvergence { .. }
            | Error::UnstableSpectrum(_)
            | Error::DegenerateEigenvalue(_)
            | Error::SingularSystem => 2,
            _ => 1,
        }
    }
}
