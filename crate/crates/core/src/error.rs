use thiserror::Error;

/// Errors raised across the solver and simulation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("operator is not monotone at {count} nodes (first at node {first})")]
    NonMonotone { count: usize, first: usize },

    #[error("solver did not converge after {iterations} iterations (last error {last_error:.3e})")]
    NotConverged {
        iterations: usize,
        last_error: f64,
        history: Vec<f64>,
    },

    #[error("domain too small: continuation region reaches z_max on beta row {row} (beta = {beta})")]
    DomainTooSmall { row: usize, beta: f64 },

    #[error("free boundary row {row} is not single-crossing")]
    NotSingleCrossing { row: usize },

    #[error("grids are not nested: {0}")]
    NotNested(String),

    #[error("bracket failure: {0}")]
    Bracket(String),

    #[error("ensemble failed: {failed} of {total} paths errored (first: {first})")]
    Ensemble {
        failed: usize,
        total: usize,
        first: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
