// SPDX-License-Identifier: MIT OR Apache-2.0

//! Crate-wide error type.

use std::path::PathBuf;

/// Errors produced by archive I/O, validation, and the analyses.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A type invariant was violated; the message names the rule.
    #[error("validation error: {0}")]
    Validation(String),

    /// Filesystem failure with the offending path.
    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed manifest or delimited table.
    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    /// Binary payload length disagrees with the manifest.
    #[error("payload size mismatch in {path}: expected {expected} bytes, found {found}")]
    PayloadSize {
        path: PathBuf,
        expected: u64,
        found: u64,
    },

    /// Stimulus id not present in the archive or table.
    #[error("unknown stimulus id `{0}`")]
    UnknownId(String),

    /// Operation precondition failed (sizes, counts, ranges).
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// A projection direction is identically zero.
    #[error("uninformative vector: {0}")]
    UninformativeVector(String),

    /// Pearson correlation with a constant input.
    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    /// Data without any variance where variance is required.
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// Optimizer produced a non-finite gradient or loss.
    #[error("non-finite value at epoch {epoch} (parameter norm {parameter_norm:.6e}): {what}")]
    NonFinite {
        epoch: usize,
        parameter_norm: f64,
        what: String,
    },

    /// Failure inside one leave-one-out fold.
    #[error("fit failed while holding out stimulus {index} (`{id}`): {source}")]
    Fold {
        index: usize,
        id: String,
        #[source]
        source: Box<Error>,
    },

    /// Failure tied to one archive reference in a sweep.
    #[error("sweep entry `{reference}` failed: {source}")]
    Sweep {
        reference: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Stable machine-parsable code, used by the CLI error line.
    pub fn code(&self) -> &'static str {
        match self {
            Self::Validation(_) => "E_VALIDATION",
            Self::Io { .. } => "E_IO",
            Self::Parse { .. } => "E_PARSE",
            Self::PayloadSize { .. } => "E_PAYLOAD_SIZE",
            Self::UnknownId(_) => "E_UNKNOWN_ID",
            Self::Precondition(_) => "E_PRECONDITION",
            Self::UninformativeVector(_) => "E_UNINFORMATIVE_VECTOR",
            Self::UndefinedCorrelation(_) => "E_UNDEFINED_CORRELATION",
            Self::DegenerateData(_) => "E_DEGENERATE_DATA",
            Self::NonFinite { .. } => "E_NON_FINITE",
            Self::Fold { source, .. } | Self::Sweep { source, .. } => source.code(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Self::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
