use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("format error in {path}: row {row}, column {col}: {msg}")]
    Format {
        path: PathBuf,
        row: usize,
        col: usize,
        msg: String,
    },

    #[error("format error in {path}: {msg}")]
    FormatFile { path: PathBuf, msg: String },

    #[error("negative kernel base {base} for pair ({u}, {v})")]
    NegativeKernelBase { u: usize, v: usize, base: f64 },

    #[error("kernel kind mismatch: {0}")]
    KindMismatch(String),

    #[error("singular system in component {component:?}")]
    Singular { component: Vec<usize> },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("root finder did not converge in [{lo}, {hi}]")]
    NoConvergence { lo: f64, hi: f64 },

    #[error("unsupported mode: {0}")]
    Unsupported(String),

    #[error("combinatorial budget exceeded: {count} evaluations (limit {limit}); use a smaller budget or fewer unlabeled nodes")]
    Combinatorial { count: u128, limit: u128 },

    #[error("round {round} aborted: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
