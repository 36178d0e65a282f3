use thiserror::Error;

/// Errors surfaced by the library. The CLI maps these onto exit codes.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value is malformed or out of range.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// An operation was asked to work outside its contract (e.g. a fixed
    /// interpretation passed where posterior-based behavior is required).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Exact enumeration would exceed the configured term or map cap.
    #[error("size limit exceeded: {what} needs {needed} but the cap is {cap}")]
    Size {
        what: String,
        needed: u128,
        cap: u128,
    },

    /// A precondition of a construction does not hold for this instance.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// The LP solver failed to terminate or certify its answer.
    #[error("solver failure: {0}")]
    Solver(String),

    /// Numerical breakdown (non-finite values, divergence).
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Should be unreachable; reported instead of panicking.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn size(what: impl Into<String>, needed: u128, cap: u128) -> Self {
        Error::Size {
            what: what.into(),
            needed,
            cap,
        }
    }
}
