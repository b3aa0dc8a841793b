use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid box ({x_min}, {y_min}, {x_max}, {y_max}): {reason}")]
    InvalidBox {
        x_min: f64,
        y_min: f64,
        x_max: f64,
        y_max: f64,
        reason: &'static str,
    },

    #[error("thin-plate spline fit failed: {0}")]
    TpsFit(String),

    #[error("degenerate warped box: {0}")]
    DegenerateWarp(String),

    #[error("{path}: {reason}")]
    Io {
        path: PathBuf,
        reason: String,
    },

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: u64,
        reason: String,
    },

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("descriptor mismatch: {0}")]
    DescriptorMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("exact PHM needs n*n' <= {limit} pairs, got {pairs}; use binned mode")]
    CostGuard { pairs: usize, limit: usize },

    #[error("no proposal lies at least 75% inside the object box")]
    EmptyRs,

    #[error("pair {pair}, stage {stage}: {source}")]
    Stage {
        pair: String,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// I/O failure on `path`.
    pub fn io(path: impl Into<PathBuf>, err: impl std::fmt::Display) -> Self {
        Error::Io {
            path: path.into(),
            reason: err.to_string(),
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: u64, reason: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            reason: reason.into(),
        }
    }

    /// Attaches the pair id and pipeline stage to an error.
    pub fn at_stage(self, pair: impl Into<String>, stage: &'static str) -> Self {
        Error::Stage {
            pair: pair.into(),
            stage,
            source: Box::new(self),
        }
    }
}
