use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor or parameter shapes do not line up.
    #[error("shape error: {0}")]
    Shape(String),

    /// An argument violates an operation's precondition.
    #[error("input error: {0}")]
    Input(String),

    /// A file does not follow its binary or text format.
    #[error("format error in {field}: {detail}")]
    Format { field: String, detail: String },

    #[error("config error: {0}")]
    Config(String),

    /// A NaN or infinity showed up in a tensor.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("io error: {0}")]
    Io(#[from] io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn format(field: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Format {
            field: field.into(),
            detail: detail.into(),
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) | Error::Input(_) => 2,
            Error::Format { .. } | Error::Io(_) | Error::Csv(_) | Error::Shape(_) => 3,
            Error::Numeric(_) => 4,
        }
    }
}
