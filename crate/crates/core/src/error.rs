use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("partition error: {0}")]
    Partition(String),

    #[error("degenerate element: {0}")]
    DegenerateElement(String),

    /// The element referenced a (row, col) pair missing from the sparsity pattern.
    #[error("structural miss: row {row} has no column for global node {col}")]
    StructuralMiss { row: usize, col: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("protocol error on rank {rank}: {msg}")]
    Protocol { rank: usize, msg: String },

    #[error("matrix is not SPD: p^T A p = {0:e} at iteration {1}")]
    NotSpd(f64, usize),

    #[error("CG diverged: non-finite value at iteration {0}")]
    Divergence(usize),

    #[error("coordinates ({0}, {1}, {2}) lie outside the unit cube")]
    OutsideDomain(f64, f64, f64),

    #[error("matrix market: {0}")]
    MatrixMarket(String),

    #[error("{phase}: {source}")]
    Phase {
        phase: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn in_phase(self, phase: &'static str) -> Error {
        match self {
            e @ Error::Phase { .. } => e,
            e => Error::Phase { phase, source: Box::new(e) },
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
