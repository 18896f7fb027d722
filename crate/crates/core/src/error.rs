use std::path::PathBuf;

use thiserror::Error;

use crate::sanitize::NoiseKey;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised while reading or validating feature and label files.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: i/o error: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic {found:?}, expected {expected:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },
    #[error("unsupported format version {0}")]
    BadVersion(u32),
    #[error("size mismatch: header implies {expected} bytes, found {found}")]
    SizeMismatch { expected: u64, found: u64 },
    #[error("non-finite feature value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("invalid dataset: {0}")]
    Invariant(String),
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, found {found}")]
    Dimension {
        op: &'static str,
        expected: String,
        found: String,
    },
    #[error("matrix is singular to working precision (min/max pivot ratio {pivot_ratio:.3e})")]
    Singular { pivot_ratio: f64 },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("noise key reused: {0:?}")]
    KeyReuse(NoiseKey),
    #[error("iteration {iteration}: non-finite gradient")]
    Diverged { iteration: usize },
    #[error("linear solve failed at iteration {iteration}, class {class}: {source}; try a larger lambda")]
    SolveFailed {
        iteration: usize,
        class: usize,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(op: &'static str, expected: impl ToString, found: impl ToString) -> Self {
        Error::Dimension {
            op,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    /// Process exit code used by the command-line harness: 1 usage, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Json(_) => 1,
            Error::Data(_) | Error::Dimension { .. } => 2,
            Error::Singular { .. }
            | Error::NonFinite(_)
            | Error::KeyReuse(_)
            | Error::Diverged { .. }
            | Error::SolveFailed { .. } => 3,
        }
    }
}
