//! File formats, experiment configuration and the command implementations
//! behind the `offpe` binary. The numerical work lives in [`offpe_core`].

pub mod commands;
pub mod config;
pub mod io;

pub use offpe_core;

/// Command failures, split by exit code: invalid input exits with 2, a
/// failed check or run with 1.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error(transparent)]
    Core(#[from] offpe_core::Error),
    #[error("check failed: {0}")]
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Check(_) | CliError::Core(offpe_core::Error::Diverged { .. }) => 1,
            _ => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
