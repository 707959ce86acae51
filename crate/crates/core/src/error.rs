use thiserror::Error;

/// Crate-wide error type.
///
/// `Config` and `Parse` are validation/usage problems; the remaining variants
/// are numerical failures detected at run time.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("failed to parse config: {0}")]
    Parse(String),

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("particle filter collapse: {0}")]
    FilterCollapse(String),

    #[error("explicit scheme unstable: CFL ratio {ratio:.3} exceeds 1 (refine the time grid)")]
    CflViolation { ratio: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn non_finite(context: impl Into<String>) -> Self {
        Error::NonFinite { context: context.into() }
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Process exit code for the CLI: 1 for usage/config problems, 2 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse(_) | Error::Io(_) => 1,
            Error::NonFinite { .. }
            | Error::FilterCollapse(_)
            | Error::CflViolation { .. }
            | Error::Domain(_) => 2,
        }
    }
}
