use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] ccfrontier_core::Error),

    /// Bad flag combination or flag value.
    #[error("{0}")]
    Usage(String),

    #[error("config {}: {msg}", path.display())]
    Config { path: PathBuf, msg: String },
}

impl CliError {
    /// 1: I/O or malformed input, 2: parameter, 3: numerical.
    pub fn exit_code(&self) -> i32 {
        use ccfrontier_core::Error as E;
        match self {
            CliError::Io { .. } => 1,
            CliError::Core(E::EmptyTrace | E::Parse { .. } | E::Ordering { .. } | E::Format { .. }) => 1,
            CliError::Core(E::Numerical(_)) => 3,
            CliError::Core(E::Param(_) | E::Fit(_) | E::Config(_)) => 2,
            CliError::Usage(_) | CliError::Config { .. } => 2,
        }
    }
}

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
