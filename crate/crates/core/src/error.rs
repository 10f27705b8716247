use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("step size {h} exceeds the admissible maximum {h_star}")]
    StepTooLarge { h: f64, h_star: f64 },

    #[error("interval [{start}, {end}] leaves the time horizon [0, {horizon}]")]
    OutsideHorizon { start: f64, end: f64, horizon: f64 },

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("configuration error in section `{section}`: {message}")]
    Config { section: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(section: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            section: section.into(),
            message: message.into(),
        }
    }
}
