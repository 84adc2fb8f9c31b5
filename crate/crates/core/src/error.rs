use alloc::string::String;

/// Errors raised by the analysis routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("a public goods game needs at least two players, got {0}")]
    TooFewPlayers(usize),
    #[error("multiplication factor r = {r} is outside the social dilemma range (1, {n})")]
    NotADilemma { n: usize, r: f64 },
    #[error("{what} = {value} is out of range (must be below {limit})")]
    OutOfRange {
        what: &'static str,
        value: usize,
        limit: usize,
    },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid probability {value} for {what}")]
    InvalidProbability { what: String, value: f64 },
    #[error("{n} players exceed the dense state-space capacity of {max}")]
    Capacity { n: usize, max: usize },
    #[error(
        "the chain is not irreducible; use the Cesaro limit from an initial distribution instead"
    )]
    NotErgodic,
    #[error("stationary solve did not reach tolerance {tol} (residual {residual})")]
    NoConvergence { tol: f64, residual: f64 },
    #[error("no cooperation-enforcing strategy exists for n = {n}, r = {r} (requires r > n/2)")]
    Inapplicable { n: usize, r: f64 },
    #[error("unknown strategy name `{0}`")]
    UnknownStrategy(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = core::result::Result<T, Error>;
