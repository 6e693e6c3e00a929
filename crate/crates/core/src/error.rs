use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the library.
///
/// Hot-path evaluation functions (`feature`, `eval_network`, risk and
/// gradient kernels) treat dimension mismatches as programmer error and
/// panic via `assert!`; constructors and anything touching configuration,
/// RNG sizes, or the filesystem return `Result` instead.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error(
        "unknown target function `{0}` (expected norm-difference, max-difference or single-neuron)"
    )]
    UnknownTarget(String),

    #[error("euler update produced a non-finite parameter for particle {particle}")]
    NonFiniteUpdate { particle: usize },

    #[error("not enough data points: need {needed}, got {got}")]
    NotEnoughPoints { needed: usize, got: usize },

    #[error("missing run summary in {0}")]
    MissingSummary(PathBuf),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed json in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
