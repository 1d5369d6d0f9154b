use thiserror::Error;

use crate::cell::Cell;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the engine can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("cell [{lo}, {hi}] is degenerate or not finite")]
    DegenerateCell { lo: f64, hi: f64 },

    #[error("cells #{first} and #{second} overlap with positive length")]
    Overlap { first: usize, second: usize },

    #[error("tag {tag} of item #{index} lies outside its cell {cell}")]
    Tag { index: usize, tag: f64, cell: Cell },

    #[error("item #{index} duplicates an earlier (cell, tag) pair")]
    Duplicate { index: usize },

    #[error("{what} is outside the domain {domain}")]
    Domain { what: String, domain: Cell },

    #[error("bisection depth exceeded {cap} near {cell}")]
    DepthExceeded { cap: usize, cell: Cell },

    #[error("integrand returned a non-finite value at x = {x}")]
    NonFiniteSample { x: f64 },

    #[error("no convergence after {iterations} refinements: best value {best} (estimate {estimate}); {reason}")]
    NoConvergence {
        iterations: usize,
        best: f64,
        estimate: f64,
        reason: String,
    },

    #[error("integrand cell {got} does not match the expected cell {expected}")]
    DomainMismatch { expected: Cell, got: Cell },

    #[error("covering needed more than {budget} disjointed families")]
    BudgetExceeded { budget: usize },

    #[error("operator is degenerate: the integral of T(1) is {value}")]
    DegenerateOperator { value: f64 },

    #[error("recovered map is not increasing near x = {x}")]
    NotIncreasing { x: f64 },

    #[error("recovered map ends at {got}, expected {expected}")]
    EndpointMismatch { expected: f64, got: f64 },

    #[error(transparent)]
    Parse(#[from] crate::expr::ParseError),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// True for failures of the numerical process itself, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DepthExceeded { .. } | Error::NoConvergence { .. } | Error::NonFiniteSample { .. }
        )
    }
}
