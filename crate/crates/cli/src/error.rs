use std::path::PathBuf;

use reram_dse_core::Error as CoreError;

/// Process exit codes.
pub mod exit {
    /// Bad arguments, config or input files.
    pub const USAGE: i32 = 2;
    /// No design point satisfies the constraints.
    pub const INFEASIBLE: i32 = 3;
    /// The circuit solver or calibration failed.
    pub const SOLVER: i32 = 4;
    /// Filesystem error.
    pub const IO: i32 = 5;
    /// Artifacts disagree with each other or with the config.
    pub const MISMATCH: i32 = 6;
}

/// Errors surfaced by the toolkit front end.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Invalid user input.
    #[error("{0}")]
    Usage(String),
    /// A file could not be read or written.
    #[error("{}: {source}", path.display())]
    Io {
        /// Offending path.
        path: PathBuf,
        /// Underlying error.
        source: std::io::Error,
    },
    /// A file did not parse.
    #[error("{}: {message}", path.display())]
    Parse {
        /// Offending path.
        path: PathBuf,
        /// Parser message.
        message: String,
    },
    /// Characterization artifacts were produced under different settings.
    #[error("fingerprint mismatch in {}: expected {expected}, found {actual}", dirs.iter().map(|d| d.display().to_string()).collect::<Vec<_>>().join(", "))]
    Mismatch {
        /// Directories whose fingerprints differ from the expected one.
        dirs: Vec<PathBuf>,
        /// Expected fingerprint.
        expected: String,
        /// First offending fingerprint.
        actual: String,
    },
    /// Error from the numerical core.
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        CliError::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// Exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Parse { .. } => exit::USAGE,
            CliError::Io { .. } => exit::IO,
            CliError::Mismatch { .. } => exit::MISMATCH,
            CliError::Core(e) => match e {
                CoreError::NoFeasiblePoint { .. } => exit::INFEASIBLE,
                CoreError::FingerprintMismatch { .. } => exit::MISMATCH,
                CoreError::InvalidParameter { .. }
                | CoreError::DimensionMismatch { .. }
                | CoreError::InsufficientSizes(_)
                | CoreError::OutOfRange { .. } => exit::USAGE,
                _ => exit::SOLVER,
            },
        }
    }
}

/// Front-end result alias.
pub type Result<T, E = CliError> = std::result::Result<T, E>;
