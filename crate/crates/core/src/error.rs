//! Crate-wide error type.

/// Errors raised by the numeric kernels and the identification pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("singular matrix: {0}")]
    SingularMatrix(String),
    #[error("eigenvalue iteration did not converge within {0} sweeps")]
    NoConvergence(usize),
    #[error("non-finite result: {0}")]
    Overflow(String),
    #[error("pitch attitude too close to +/-90 deg: theta = {0}")]
    GimbalProximity(f64),
    #[error("bad signal spec: {0}")]
    BadSpec(String),
    #[error("bad shape: {0}")]
    BadShape(String),
    #[error("insufficient history: need t >= {need}, got t = {got}")]
    InsufficientHistory { need: usize, got: usize },
    #[error("empty sequence")]
    EmptySequence,
    #[error("linear solve failed during optimization: {0}")]
    LinearSolveFailure(String),
    #[error("non-finite residual at initial parameters")]
    NonFiniteResidual,
    #[error("missing channel: {0}")]
    MissingChannel(String),
    #[error("dataset too short: {0}")]
    TooShort(String),
    #[error("zero variance in {0}")]
    ZeroVariance(String),
    #[error("closed-loop rollout diverged at step {0}")]
    DivergentRollout(usize),
    #[error("io error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
