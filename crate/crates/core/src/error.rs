use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("{}: {source}", path.display())]
    IoAt {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    /// Malformed FASTQ input. `line` is 1-based and approximate when the
    /// failure is detected at end of file.
    #[error("{file}:{line}: {msg}")]
    Parse { file: String, line: u64, msg: String },

    /// A bin file or catalog that does not follow the on-disk layout.
    #[error("format error: {0}")]
    Format(String),

    /// A compressed archive whose streams are inconsistent or truncated.
    #[error("corrupt archive: {0}")]
    Corrupt(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) trait IoContext<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T>;
}

impl<T> IoContext<T> for io::Result<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T> {
        self.map_err(|source| Error::IoAt {
            path: path.into(),
            source,
        })
    }
}

pub(crate) fn corrupt(msg: impl Into<String>) -> Error {
    Error::Corrupt(msg.into())
}
