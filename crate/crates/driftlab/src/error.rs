use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("variance must be nonnegative, got {0}")]
    NegativeVariance(f64),

    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("contraction rate gamma = {gamma} is not below 1; step-size outside stability range")]
    NotContractive { gamma: f64 },

    #[error("could not draw a connected graph in {attempts} attempts (edge probability too small for {agents} agents)")]
    GraphNotConnected { agents: usize, attempts: usize },

    #[error("power iteration did not converge in {0} iterations; combination matrix may not be primitive")]
    PowerIterationDiverged(usize),

    #[error("step-size/regularization product too large: mu*eta*deg = {0} >= 1")]
    WeightsOutOfRange(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("step-size grid must span at least one decade with >= 3 points")]
    DegenerateSlopeFit,

    #[error("edge list parse error at line {line}: {reason}")]
    EdgeListParse { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
