use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, DnlsError>;

#[derive(Debug, Error)]
pub enum DnlsError {
    /// Shapes, lengths or time grids that do not line up.
    #[error("structural error: {0}")]
    Structural(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    /// The field or a packet reaches the edge of the periodic box.
    #[error("domain error: {message}")]
    Domain {
        message: String,
        required_half_width: Option<f64>,
    },

    #[error("solution blew up after t = {last_good_time}")]
    BlowUp { last_good_time: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("snapshot format error: {0}")]
    Format(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl DnlsError {
    pub(crate) fn domain(message: impl Into<String>) -> Self {
        DnlsError::Domain {
            message: message.into(),
            required_half_width: None,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DnlsError::Io {
            path: path.into(),
            source,
        }
    }
}
