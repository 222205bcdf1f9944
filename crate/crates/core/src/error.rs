use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Inputs violate a precondition (dimension, time range, count).
    #[error("domain error: {0}")]
    Domain(String),

    /// A named parameter is outside its valid range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A problem is larger than the operation supports.
    #[error("size error: {0}")]
    Size(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Declared bounds disagree with sampled estimates.
    #[error("construction error: {0}")]
    Construction(String),

    #[error("integration diverged at particle {particle}, t = {time}")]
    Divergence { particle: usize, time: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

macro_rules! ensure {
    ($cond:expr, $variant:ident, $($arg:tt)+) => {
        if !$cond {
            return Err($crate::Error::$variant(format!($($arg)+)));
        }
    };
}
pub(crate) use ensure;
