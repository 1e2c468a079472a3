use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("barrier search failed: {0}")]
    Search(String),
    #[error("flow aborted: {0}")]
    FlowAbort(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Solver(_) => 2,
            CliError::Search(_) => 3,
            CliError::FlowAbort(_) => 4,
        }
    }
}
