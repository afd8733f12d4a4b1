use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("bad magic in {what}: expected {expected:#010x}, found {found:#010x}")]
    BadMagic {
        what: &'static str,
        expected: u32,
        found: u32,
    },

    #[error("truncated {what}: needed {needed} bytes, found {found}")]
    Truncated {
        what: &'static str,
        needed: usize,
        found: usize,
    },

    #[error("count mismatch: {0}")]
    CountMismatch(String),

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),

    #[error("class {class} has only {found} samples, {needed} required")]
    InsufficientSamples {
        class: usize,
        needed: usize,
        found: usize,
    },

    #[error("target class {0} has no samples")]
    EmptyTargetClass(usize),

    #[error("update log does not match model: {0}")]
    LogMismatch(String),

    #[error("missing data file {}", .0.display())]
    MissingData(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end.
    ///
    /// 1 = usage/config, 2 = data or file problem, 3 = numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) | Error::DimensionMismatch { .. } => 1,
            Error::NumericalFailure(_) => 3,
            _ => 2,
        }
    }
}
