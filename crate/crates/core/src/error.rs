use std::path::PathBuf;

use crate::platoon::VehicleId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An input value is non-finite, out of range or inconsistent.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// A message required by the step schedule was not delivered.
    #[error("protocol error at vehicle {vehicle}: missing {what}")]
    Protocol { vehicle: VehicleId, what: String },

    #[error("numerical error: {0}")]
    Numerical(String),

    /// The simulated state left the representable range.
    #[error("simulation diverged at step {step}, vehicle {vehicle}")]
    Diverged { step: u64, vehicle: VehicleId },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error on {path}: {message}")]
    Serialization { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
