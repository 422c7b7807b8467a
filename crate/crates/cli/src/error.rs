use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use vimp_core::VimpError;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config keys or parameter values.
    Usage(String),
    Io { path: PathBuf, source: std::io::Error },
    /// A readable file whose contents are malformed.
    Input { path: PathBuf, message: String },
    /// An identity check failed.
    Violation(String),
    /// The computation itself failed (rank deficiency, degenerate data, ...).
    Compute(VimpError),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn input(path: &Path, message: impl Into<String>) -> Self {
        CliError::Input { path: path.to_path_buf(), message: message.into() }
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Violation(_) | CliError::Compute(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io { .. } | CliError::Input { .. } => 3,
        })
    }
}

impl From<VimpError> for CliError {
    fn from(e: VimpError) -> Self {
        match e {
            VimpError::InvalidParameter(m) | VimpError::InvalidConfig(m) => CliError::Usage(m),
            other => CliError::Compute(other),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::Input { path, message } => write!(f, "{}: {message}", path.display()),
            CliError::Violation(m) => write!(f, "check failed: {m}"),
            CliError::Compute(e) => write!(f, "{e}"),
        }
    }
}
