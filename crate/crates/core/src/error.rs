use std::io;

use thiserror::Error;

use crate::codec::{DecodeError, Mismatch};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Decode(#[from] DecodeError),

    #[error("verification failed after {attempts} attempt(s): {last}")]
    RetriesExhausted { attempts: u32, last: Mismatch },

    #[error("oracle refused input of {n} bytes (limit {limit})")]
    OracleLimit { n: usize, limit: usize },
}

impl Error {
    pub fn io(context: impl Into<String>, source: io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}

impl From<io::Error> for Error {
    fn from(source: io::Error) -> Self {
        Error::io("read error", source)
    }
}
