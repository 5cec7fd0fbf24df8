use std::path::PathBuf;

/// Errors produced by the solvers, generators and the experiment harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The inner loop could not certify the relative-error criterion.
    #[error(
        "certification failed at outer iteration {iteration} after {inner_iterations} inner steps \
         (lhs = {lhs:e}, sigma * rhs = {bound:e})"
    )]
    CertificationFailure {
        iteration: usize,
        inner_iterations: usize,
        lhs: f64,
        bound: f64,
    },

    #[error("audit failed with {} violation(s); first: {}", .0.len(), .0.first().map(String::as_str).unwrap_or("-"))]
    AuditFailure(Vec<String>),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for certification and audit failures, which the CLI maps to exit code 2.
    pub fn is_certification(&self) -> bool {
        matches!(
            self,
            Error::CertificationFailure { .. } | Error::AuditFailure(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
