use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation (off-grid window, bad exponent, ...).
    #[error("domain error: {0}")]
    Domain(String),
    /// A numerical routine failed (non-finite state, singular matrix, embedding failure, ...).
    #[error("numeric error: {0}")]
    Numeric(String),
    /// A hypothesis required by the computation does not hold on the given input.
    #[error("precondition violated: {0}")]
    Precondition(String),
    /// Invalid or missing configuration; `field` names the offending key path.
    #[error("configuration error at `{field}`: {msg}")]
    Config { field: String, msg: String },
    /// Malformed input file; `line` is 1-based.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            msg: msg.into(),
        }
    }
}
