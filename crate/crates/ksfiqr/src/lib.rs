//! File formats, replication sweeps and solution paths for `ksfiqr-core`.
//!
//! Everything here is deterministic: datasets, fit reports, sweep tables and
//! path tables are pure functions of their inputs and seeds, whatever the
//! rayon thread count.

pub mod cli;
pub mod io;
pub mod path;
pub mod report;
pub mod sweep;

use std::path::PathBuf;

pub use ksfiqr_core as core;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] ksfiqr_core::Error),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    /// Malformed input file contents.
    #[error("{0}")]
    Format(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}
