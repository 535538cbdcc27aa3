use thiserror::Error;

/// Failures surfaced by the commands. The split decides the exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// The config, a file it points to, or a flag is unusable.
    #[error("config error: {0}")]
    Config(String),
    /// Anything that went wrong while running: I/O, corrupt corpora, empty input.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn config(e: impl ToString) -> Self {
        CliError::Config(e.to_string())
    }

    pub fn runtime(e: impl ToString) -> Self {
        CliError::Runtime(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
