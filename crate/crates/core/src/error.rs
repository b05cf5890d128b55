use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure surfaced by the library. Variants mirror the error kinds of
/// the individual modules so callers can map them onto exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("not found: {0}")]
    NotFound(PathBuf),
    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("parse error in {path} at line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid footprint: {0}")]
    InvalidFootprint(String),
    #[error("invalid seed label: label must be non-empty")]
    InvalidLabel,
    #[error("version control unavailable: {0}")]
    VcsUnavailable(String),
    #[error("invalid metric: {0}")]
    InvalidMetric(String),
    #[error("metric order violation: {0}")]
    OrderViolation(String),
    #[error("dataset layout error: {0}")]
    Layout(String),
    #[error("output already exists and is not empty: {0}")]
    Exists(PathBuf),
    #[error("unsupported or malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("step grids differ between runs: {0}")]
    GridMismatch(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("label error: {0}")]
    Label(String),
    #[error("value error: {0}")]
    Value(String),
    #[error("eigendecomposition did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    #[error("invalid specification: {0}")]
    Spec(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("invalid parameter space: {0}")]
    Space(String),
    #[error("metric {metric} missing from run {run_id}")]
    MissingMetric { run_id: String, metric: String },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<Path>, source: io::Error) -> Self {
        if source.kind() == io::ErrorKind::NotFound {
            return Error::NotFound(path.as_ref().to_path_buf());
        }
        Error::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub(crate) fn json(path: impl AsRef<Path>, err: &serde_json::Error) -> Self {
        Error::Parse {
            path: path.as_ref().to_path_buf(),
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}
