use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration or argument value is outside its domain.
    #[error("invalid parameter `{field}`: {reason}")]
    Parameter { field: &'static str, reason: String },

    #[error("parse error at {location}: {reason}")]
    Parse { location: String, reason: String },

    #[error("empty input")]
    EmptyInput,

    #[error("format error: {0}")]
    Format(String),

    #[error("decode error: {0}")]
    Decode(String),

    /// Blahut-Arimoto hit its iteration cap before the duality gap closed.
    #[error("no convergence after {iterations} iterations (gap {gap:.3e} bits)")]
    NoConvergence { iterations: usize, gap: f64 },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            field,
            reason: reason.into(),
        }
    }
}
