use thiserror::Error;

/// Errors raised by the samplers, models and oracles in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("level {level} is outside 1..={horizon}")]
    LevelOutOfRange { level: usize, horizon: usize },

    #[error("path at level {level} lies outside the target support")]
    OutOfSupport { level: usize },

    #[error("initial path for level {level} lies outside the target support")]
    InitOutOfSupport { level: usize },

    #[error("storage mode mismatch: {0}")]
    ModeMismatch(String),

    #[error("no proposals have been made at level {level}")]
    NoProposalsYet { level: usize },

    #[error("all incremental weights are zero at level {level}")]
    Degenerate { level: usize },

    #[error("weights are not a probability vector (sum = {sum})")]
    BadWeights { sum: f64 },

    #[error("target at level {level} has zero total mass")]
    ZeroMass { level: usize },

    #[error("innovation covariance is not positive definite at step {step}")]
    NumericalFailure { step: usize },

    #[error("bearing is undefined at the origin")]
    OriginBearing,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
