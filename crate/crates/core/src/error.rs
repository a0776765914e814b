use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("span {span} exceeds the limit {limit}")]
    Span { span: usize, limit: usize },

    #[error("operation `{op}` is not available for {kind} systems")]
    Kind { op: &'static str, kind: &'static str },

    #[error("horizon error: need {needed} symbols, point can provide {available}")]
    Horizon { needed: usize, available: usize },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("sampling budget of {budget} attempts exhausted: {what}")]
    Sampling { budget: usize, what: String },

    #[error("{0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}
