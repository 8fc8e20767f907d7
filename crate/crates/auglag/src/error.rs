use std::fmt;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors shared by every module of the crate.
#[derive(Debug)]
pub enum Error {
    /// A precondition on the inputs was violated.
    InvalidArgument(String),
    /// An iterative linear solver ran out of iterations. Carries the best
    /// iterate so callers can retry (e.g. with a damped Newton step).
    LinearSolve {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },
    /// Newton's method on a nonlinear system did not reach its tolerance.
    /// `trace` holds the residual norm of every iterate.
    NewtonFailure {
        what: &'static str,
        iterations: usize,
        residual: f64,
        trace: Vec<f64>,
    },
    /// The problem data violated a model assumption at runtime
    /// (e.g. a negative derivative of the monotone nonlinearity).
    ModelViolation(String),
    /// The requested operation is not available for this problem
    /// (e.g. error norms without an exact solution).
    Unsupported(String),
    Io(std::io::Error),
    Json(serde_json::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::LinearSolve {
                iterations,
                residual,
                ..
            } => write!(
                f,
                "linear solver did not converge after {iterations} iterations (residual {residual:.3e})"
            ),
            Error::NewtonFailure {
                what,
                iterations,
                residual,
                ..
            } => write!(
                f,
                "{what} did not converge after {iterations} iterations (residual {residual:.3e})"
            ),
            Error::ModelViolation(msg) => write!(f, "model violation: {msg}"),
            Error::Unsupported(msg) => write!(f, "unsupported operation: {msg}"),
            Error::Io(e) => write!(f, "io error: {e}"),
            Error::Json(e) => write!(f, "json error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            Error::Json(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e)
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
