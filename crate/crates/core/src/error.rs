use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("not implemented: {0}")]
    NotImplemented(String),

    #[error("degenerate element {element}: {reason}")]
    DegenerateElement { element: usize, reason: String },

    /// Boundary conditions or study settings that cannot yield a well-posed system.
    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("eigensolver did not converge after {iterations} operator applications (residual {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("linear algebra backend: {0}")]
    Backend(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Configuration(msg.into())
    }

    /// True for failures that happen before any numerical work starts.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_) | Error::Configuration(_) | Error::Json(_) | Error::Parse { .. }
        )
    }
}
