use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("cutoff too small for mode {mode}: cutoff {cutoff}, need at least {required}")]
    CutoffTooSmall {
        mode: usize,
        cutoff: usize,
        required: usize,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operator dimension {dim} exceeds the budget of {budget}")]
    Resource { dim: usize, budget: usize },

    #[error("malformed data: {0}")]
    Data(String),

    #[error("no convergence after {iterations} iterations (estimate {estimate:e}, residual {residual:e})")]
    NotConverged {
        iterations: usize,
        estimate: f64,
        residual: f64,
    },

    #[error("energy trace oscillates: {trace:?}")]
    Oscillation { trace: Vec<f64> },

    #[error("trap not representable: {0}")]
    Unrepresentable(String),
}

impl Error {
    /// True for failures of an iterative solver rather than of the input.
    pub fn is_convergence(&self) -> bool {
        matches!(self, Error::NotConverged { .. } | Error::Oscillation { .. })
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Configuration(msg.into())
}

pub(crate) fn precondition(msg: impl Into<String>) -> Error {
    Error::Precondition(msg.into())
}
