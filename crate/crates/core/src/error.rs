use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("q must be < 1 (got {0})")]
    ErasureTooLarge(f64),
    #[error("q must be >= 0 (got {0})")]
    ErasureNegative(f64),
    #[error("q = {0} is too close to 1: expected attempts per epoch exceed 1e4")]
    ErasureTooCloseToOne(f64),
    #[error("{name} must be a nonnegative number (got {value})")]
    Negative { name: &'static str, value: f64 },
    #[error("number of sources must be at least 1")]
    NoSources,
    #[error("policy combination is not supported: {0}")]
    InvalidPolicy(String),
    #[error("invalid solver configuration: {0}")]
    InvalidSolverConfig(String),
    #[error("bracket [{lo}, {hi}] does not straddle a sign change")]
    BracketNoSignChange { lo: f64, hi: f64 },
    #[error("solver did not converge within {0} iterations")]
    NoConvergence(usize),
    #[error("invalid simulation configuration: {0}")]
    InvalidSimConfig(String),
    #[error("no epochs to estimate from")]
    EmptySample,
}
