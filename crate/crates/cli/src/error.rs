use splinenet::Error as CoreError;
use thiserror::Error;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Error, Debug)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Input { path: String, source: CoreError },

    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("checkpoint has no distance-mode kernels to inspect")]
    NoDistanceKernels,

    #[error("{0}")]
    Numerical(String),

    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::NoDistanceKernels | CliError::Io { .. } => EXIT_DATA,
            CliError::Input { source, .. } | CliError::Core(source) => match source {
                CoreError::NonFinite(_) | CoreError::DegreeCap { .. } => EXIT_NUMERICAL,
                CoreError::Config(_) => EXIT_USAGE,
                _ => EXIT_DATA,
            },
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, e: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            msg: e.to_string(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
