//! Error type shared by the whole crate.

use thiserror::Error;

/// Errors produced by the library.
///
/// The variants map onto the distinct failure classes the CLI reports
/// with separate exit codes: configuration, schema, training divergence,
/// and optimization.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a documented precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value or combination is invalid or infeasible.
    #[error("config error: {0}")]
    Config(String),

    /// A persisted file failed schema validation.
    #[error("schema error: {0}")]
    Schema(String),

    /// A numeric quantity became non-finite where finiteness is required.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Training produced a non-finite loss. Carries the last epoch that
    /// completed with finite losses so callers can persist a usable
    /// checkpoint.
    #[error("training diverged at epoch {epoch}: {reason}")]
    Diverged {
        epoch: usize,
        reason: String,
        last_good: Option<Box<crate::learning::Stage2Checkpoint>>,
    },

    /// The optimizer could not make progress (e.g. objective non-finite
    /// on the entire initial population).
    #[error("optimization error: {0}")]
    Optimization(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True when the error is a training-divergence report.
    pub fn is_divergence(&self) -> bool {
        matches!(self, Error::Diverged { .. })
    }
}
