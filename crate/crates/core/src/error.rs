use thiserror::Error;

/// Errors produced by the simulation, reconstruction and analysis layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown polarization label `{0}`")]
    UnknownPolarization(String),

    #[error("unknown Bell state label `{0}`")]
    UnknownBellState(String),

    #[error("matrix is not Hermitian (max |m - m^dagger| = {0:.3e})")]
    NotHermitian(f64),

    #[error("non-physical density matrix: {0}")]
    NotPhysical(String),

    #[error("eigen-decomposition did not converge")]
    EigenNotConverged,

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid measurement set: {0}")]
    InvalidMeasurementSet(String),

    #[error("degenerate image: {0}")]
    DegenerateImage(String),

    #[error("lattice spacing estimation failed: {0}")]
    EstimationFailed(String),

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("malformed {format} data: {reason}")]
    Format {
        format: &'static str,
        reason: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn format(format: &'static str, reason: impl Into<String>) -> Self {
        Error::Format {
            format,
            reason: reason.into(),
        }
    }
}
