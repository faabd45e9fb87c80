use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("value {value} outside the domain {domain}")]
    Domain { value: f64, domain: &'static str },

    #[error("level {level} exceeds the configured maximum {max}")]
    LevelTooLarge { level: u32, max: u32 },

    #[error("invalid candidate function: {0}")]
    InvalidCandidate(String),

    #[error("ratio {ratio} is outside (2^-1/2, 1); the scaling criterion does not apply")]
    RatioOutOfRange { ratio: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("infeasible target: {0}")]
    Infeasible(String),

    #[error("construction produced an empty code: {0}")]
    EmptyCode(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },

    #[error("decoder resolved channel {index} to a value contradicting its frozen value")]
    Inconsistency { index: u64 },

    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn format(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Format {
            what,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
