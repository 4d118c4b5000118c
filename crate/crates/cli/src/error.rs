use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad invocation: unknown subcommand, flag or phantom name.
    #[error("usage: {0}")]
    Usage(String),
    /// Inputs that parse but do not make sense together.
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Validation(_) | CliError::Io { .. } => 3,
            CliError::Solver(_) => 4,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }
}

impl From<atrt_core::Error> for CliError {
    fn from(e: atrt_core::Error) -> Self {
        match e {
            atrt_core::Error::Solver(msg) => CliError::Solver(msg),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
