use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A design or simulation configuration failed validation. `field` names
    /// the offending JSON field.
    #[error("invalid `{field}`: {message}")]
    Config { field: String, message: String },

    /// The problem is too large for an exhaustive method.
    #[error("size error: {0}")]
    Size(String),

    #[error("length mismatch: {left} values vs {right} weights")]
    LengthMismatch { left: usize, right: usize },

    #[error("sample size {0} is not a scheduled look")]
    NotALook(usize),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { field: field.into(), message: message.into() }
    }

    pub(crate) fn domain(message: impl Into<String>) -> Self {
        Error::Domain(message.into())
    }
}
