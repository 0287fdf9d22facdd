use rabi_nccm::Error as CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("{0}")]
    Core(#[from] CoreError),

    #[error("check failed: {0}")]
    Check(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 0 success, 1 check mismatch or I/O, 2 config, 3 Diverged, 4 NoConvergence.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(CoreError::Diverged { .. }) => 3,
            CliError::Core(CoreError::NoConvergence { .. }) => 4,
            CliError::Core(
                CoreError::InvalidParams(_)
                | CoreError::DimensionMismatch { .. }
                | CoreError::Format(_)
                | CoreError::NonUniformSampling,
            ) => 2,
            CliError::Core(_) | CliError::Check(_) | CliError::Io(_) => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
