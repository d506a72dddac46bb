use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse failure class, used by the command-line front end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Io,
    Numeric,
    Validation,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Usage => 2,
            ErrorClass::Io => 3,
            ErrorClass::Numeric => 4,
            ErrorClass::Validation => 5,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic bytes: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("checksum mismatch: header says {expected:016x}, payload hashes to {actual:016x}")]
    ChecksumMismatch { expected: u64, actual: u64 },

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("non-finite value in column {column} (row {row})")]
    NonFinite { column: usize, row: usize },

    #[error("dimension mismatch: {left} vs {right}")]
    Dimension { left: String, right: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("Cholesky factorization failed at index {index}: pivot {pivot:e}")]
    Cholesky { index: usize, pivot: f64 },

    #[error("numerical check failed: {0}")]
    Numeric(String),

    #[error("validation failed: {0}")]
    Validation(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dims(left: impl Into<String>, right: impl Into<String>) -> Self {
        Error::Dimension {
            left: left.into(),
            right: right.into(),
        }
    }

    pub(crate) fn format(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            what,
            detail: detail.into(),
        }
    }

    /// Stable short code for each failure kind; distinct per variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::BadMagic { .. } => "bad-magic",
            Error::VersionMismatch { .. } => "version-mismatch",
            Error::ChecksumMismatch { .. } => "checksum-mismatch",
            Error::Truncated { .. } => "truncated",
            Error::Format { .. } => "format",
            Error::NonFinite { .. } => "non-finite",
            Error::Dimension { .. } => "dimension",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::TooFewSamples { .. } => "too-few-samples",
            Error::Degenerate(_) => "degenerate",
            Error::Cholesky { .. } => "cholesky",
            Error::Numeric(_) => "numeric",
            Error::Validation(_) => "validation",
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io { .. }
            | Error::BadMagic { .. }
            | Error::VersionMismatch { .. }
            | Error::ChecksumMismatch { .. }
            | Error::Truncated { .. }
            | Error::Format { .. } => ErrorClass::Io,
            Error::InvalidArgument(_) => ErrorClass::Usage,
            Error::Cholesky { .. } | Error::Numeric(_) | Error::Degenerate(_) => {
                ErrorClass::Numeric
            }
            Error::NonFinite { .. }
            | Error::Dimension { .. }
            | Error::TooFewSamples { .. }
            | Error::Validation(_) => ErrorClass::Validation,
        }
    }
}
