use std::fmt;

/// Failures of a command, each with its process exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config { field: String, msg: String },
    Lib(rstab::Error),
    Io(std::io::Error),
}

impl CliError {
    pub fn config(field: impl Into<String>, msg: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            msg: msg.into(),
        }
    }

    /// 64 usage, 65 bad configuration or input data, 70 numerical failure, 74 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 64,
            CliError::Config { .. } => 65,
            CliError::Lib(e) => match e {
                rstab::Error::Config { .. }
                | rstab::Error::Parse { .. }
                | rstab::Error::Domain(_)
                | rstab::Error::Precondition(_) => 65,
                rstab::Error::Numeric(_) => 70,
                rstab::Error::Io(_) => 74,
            },
            CliError::Io(_) => 74,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Config { field, msg } => write!(f, "configuration error at `{field}`: {msg}"),
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "I/O error: {e}"),
        }
    }
}

impl From<rstab::Error> for CliError {
    fn from(e: rstab::Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::config("output", e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
