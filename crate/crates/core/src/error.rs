use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A model parameter is out of range. `field` is the user-facing name (`sigma2`, `phi`, `R`, ...).
    #[error("invalid {field}: {reason}")]
    Parameter { field: &'static str, reason: String },

    /// The batching geometry does not fit the data, e.g. T not divisible by R.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("input error: {0}")]
    Input(String),

    /// The quantity is undefined for these inputs (zero variance denominators and the like).
    #[error("domain error: {0}")]
    Domain(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            field,
            reason: reason.into(),
        }
    }

    /// The offending field for parameter errors.
    pub fn field(&self) -> Option<&'static str> {
        match self {
            Error::Parameter { field, .. } => Some(field),
            _ => None,
        }
    }
}
