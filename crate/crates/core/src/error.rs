use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// An iterative numerical routine failed to meet its tolerance.
    #[error("numerical failure in {what} after {iterations} iterations")]
    Numerical { what: &'static str, iterations: usize },

    #[error("value iteration did not converge after {iterations} iterations (last sup-norm delta {last_delta:e})")]
    Convergence { iterations: usize, last_delta: f64 },

    #[error("singular linear system (pivot {pivot:e} in column {column})")]
    Singular { column: usize, pivot: f64 },

    /// A caller broke an operation's contract (illegal action, inconsistent
    /// equilibrium search, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("lookup table: {0}")]
    Table(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
