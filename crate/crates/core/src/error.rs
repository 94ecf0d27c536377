use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// The scalar function is not defined (or not analytic) at an eigenvalue.
    #[error("domain error: {0}")]
    Domain(String),

    /// Parlett recurrence hit a (near) repeated eigenvalue.
    #[error("ill-conditioned evaluation: {0}")]
    IllConditioned(String),

    #[error("matrix declared hermitian but symmetry probe failed (relative mismatch {0:.3e})")]
    NotHermitian(f64),

    #[error("decay fit failed: {0}")]
    Fit(String),

    #[error("dense oracle refused: n = {n} exceeds cap {cap}")]
    OracleCap { n: usize, cap: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    /// True for errors caused by bad input rather than numerics.
    pub fn is_argument_error(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch(_)
                | Error::InvalidArgument(_)
                | Error::Parse { .. }
                | Error::Io(_)
                | Error::OracleCap { .. }
        )
    }
}
