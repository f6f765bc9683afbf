use thiserror::Error;

use crate::autodiff::AdError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("pairing error: {0}")]
    Pairing(String),
    #[error("contract error: {0}")]
    Contract(String),
    #[error(transparent)]
    Autodiff(#[from] AdError),
    #[error("numeric abort at iteration {iteration}: {detail}")]
    Numeric { iteration: u64, detail: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// CLI exit code: 1 usage/config, 2 data/format, 3 numeric abort.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Contract(_) | Error::Autodiff(_) => 1,
            Error::Data(_) | Error::Pairing(_) | Error::Io { .. } => 2,
            Error::Numeric { .. } => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
