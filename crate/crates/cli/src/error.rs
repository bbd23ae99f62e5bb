use thiserror::Error;

/// Failure of a command, carrying the process exit code it maps to.
#[derive(Debug, Error)]
pub enum CliError {
    /// Missing or invalid configuration key.
    #[error("config: {0}")]
    Config(String),
    /// Unreadable or inconsistent input files.
    #[error("input: {0}")]
    Input(String),
    #[error("solver failed: {0}")]
    Solver(#[from] corosa::Error),
    #[error("output: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Input(_) => 2,
            Self::Solver(_) | Self::Output(_) => 3,
        }
    }

    pub(crate) fn output(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        Self::Output(format!("{}: {e}", path.display()))
    }

    pub(crate) fn input(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        Self::Input(format!("{}: {e}", path.display()))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
