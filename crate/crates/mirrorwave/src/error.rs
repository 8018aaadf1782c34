use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    /// An input file does not match the expected CSV layout.
    #[error("schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    Model(#[from] mirrorwave_core::Error),
    #[error("cannot write {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    /// 2 for bad input or violated preconditions, 3 for numerical failures,
    /// 1 when output cannot be written.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Schema(_) => 2,
            CliError::Model(e) if e.is_precondition() => 2,
            CliError::Model(_) => 3,
            CliError::Io { .. } => 1,
        }
    }
}
