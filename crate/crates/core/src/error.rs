use alloc::string::String;

/// Errors raised by the numeric core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("value out of range: {0}")]
    Range(String),
    #[error("annotation error: {0}")]
    Annotation(String),
    #[error("scorer failure: {0}")]
    Scorer(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

macro_rules! shape_err {
    ($($arg:tt)*) => {
        $crate::error::Error::Shape(alloc::format!($($arg)*))
    };
}

pub(crate) use shape_err;
