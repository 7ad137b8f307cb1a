use std::path::{Path, PathBuf};

use spinlattice::Error as CoreError;
use thiserror::Error;

/// Every variant renders on one line as `<kind>: <message>`.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("config: key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("io: {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{}: {}: {source}", kind(source), path.display())]
    Input { path: PathBuf, source: CoreError },

    #[error("{}: {source}", kind(source))]
    Core {
        #[from]
        source: CoreError,
    },
}

impl CliError {
    pub fn config(key: &str, reason: impl Into<String>) -> Self {
        CliError::Config {
            key: key.to_string(),
            reason: reason.into(),
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn input(path: &Path, source: CoreError) -> Self {
        match source {
            CoreError::Io(e) => CliError::io(path, e),
            source => CliError::Input {
                path: path.to_path_buf(),
                source,
            },
        }
    }

    /// Process exit status.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

/// Short machine-readable tag for a library error.
fn kind(e: &CoreError) -> &'static str {
    match e {
        CoreError::UnknownPolarization(_) | CoreError::UnknownBellState(_) => "label",
        CoreError::NotHermitian(_) | CoreError::NotPhysical(_) => "state",
        CoreError::EigenNotConverged => "numeric",
        CoreError::InvalidParameter { .. } => "parameter",
        CoreError::InvalidMeasurementSet(_) => "measurement-set",
        CoreError::DegenerateImage(_) => "degenerate-image",
        CoreError::EstimationFailed(_) => "estimation",
        CoreError::GeometryMismatch(_) => "geometry",
        CoreError::Format { .. } => "format",
        CoreError::Io(_) => "io",
    }
}
