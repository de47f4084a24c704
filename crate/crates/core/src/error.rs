use thiserror::Error;

/// Errors produced by the model and the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// No positive power (or no bandwidth within the budget) satisfies the
    /// uplink energy constraint for the listed users.
    #[error("energy constraint infeasible for user(s) {users:?}")]
    EnergyInfeasible { users: Vec<usize> },

    /// Decision vectors do not match the number of users.
    #[error("dimension mismatch: expected {expected} entries, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The starting decision violates a constraint.
    #[error("infeasible initial decision: {0}")]
    InfeasibleInit(String),

    /// A block solver failed inside the alternating loop.
    #[error("{block} step failed at iteration {iteration}: {source}")]
    Block {
        iteration: usize,
        block: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True when the error (or the error it wraps) means the instance has no
    /// feasible point, as opposed to bad input.
    pub fn is_infeasible(&self) -> bool {
        match self {
            Error::EnergyInfeasible { .. } | Error::InfeasibleInit(_) => true,
            Error::Block { source, .. } => source.is_infeasible(),
            _ => false,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
