use crate::rat::Rat;
use thiserror::Error;

/// Errors surfaced by mechanism runs, audits, and oracles.
///
/// Every failure here is a hard contract violation: callers are expected to
/// validate instances up front, so none of these are recoverable mid-run.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unknown agent id {0}")]
    UnknownAgent(usize),
    #[error("bid profile has {got} bids but the instance has {expected} agents")]
    BidCount { expected: usize, got: usize },
    #[error("ground set size {size} exceeds the exhaustive-search cap {cap}")]
    CapExceeded { size: usize, cap: usize },
    #[error("{mechanism} requires a nondecreasing submodular valuation (coverage or additive)")]
    NotSubmodular { mechanism: &'static str },
    #[error("{mechanism} requires an independence-system or additive valuation")]
    NotIndependenceSystem { mechanism: &'static str },
    #[error("{mechanism} requires a coverage valuation")]
    NotCoverage { mechanism: &'static str },
    #[error("rho must be at least 1, got {0}")]
    InvalidRho(f64),
    #[error("invalid rational literal {0:?}")]
    BadRational(String),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("linear program solve failed: {0}")]
    LpFailure(String),
    #[error("agent {0} is not a winner under the given bids")]
    NotAWinner(usize),
    #[error("allocation is not monotone for agent {agent}: loses at bid {low} but wins at bid {high}")]
    NonMonotone { agent: usize, low: Box<Rat>, high: Box<Rat> },
}

pub type Result<T> = std::result::Result<T, Error>;
