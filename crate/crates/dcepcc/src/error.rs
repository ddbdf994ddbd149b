use std::path::Path;

/// Failure of a command, classified by exit status.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags or configuration keys.
    #[error("{0}")]
    Usage(String),
    /// Unreadable or inconsistent input data, configs or checkpoints.
    #[error("{0}")]
    Data(String),
    /// A self-check ran and failed.
    #[error("{0}")]
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Check(_) => 3,
        }
    }

    pub(crate) fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Data(format!("{}: {err}", path.display()))
    }
}

impl From<dcepcc_core::Error> for CliError {
    fn from(err: dcepcc_core::Error) -> Self {
        CliError::Data(err.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
