//! Error type shared by every module.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, GhostError>;

#[derive(Debug, Error)]
pub enum GhostError {
    #[error("orphan response at event offset {0}")]
    OrphanResponse(usize),
    #[error("empty request message at {0}")]
    EmptyRequest(String),
    #[error("line {line}: {msg}")]
    TraceLine { line: usize, msg: String },
    #[error("line {line}: invalid base64 in field `{field}`")]
    Base64 { line: usize, field: String },
    #[error("model version mismatch: file has {found}, expected {expected}")]
    VersionMismatch { found: u64, expected: u64 },
    #[error("model parse error: {0}")]
    ModelParse(String),
    #[error("undefined ratio: both messages are empty")]
    UndefinedRatio,
    #[error("degenerate prototype: no concrete column")]
    DegeneratePrototype,
    #[error("matrix needs at least 2 interactions, got {0}")]
    MatrixTooSmall(usize),
    #[error("invalid boundaries: {0}")]
    InvalidBoundaries(String),
    #[error("empty profile")]
    EmptyProfile,
    #[error("empty cluster {0}")]
    EmptyCluster(usize),
    #[error("empty library")]
    EmptyLibrary,
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("noise injection needs at least two clusters: nowhere to swap")]
    NowhereToSwap,
    #[error("k >= 2 required, got {0}")]
    Folds(usize),
    #[error("internal invariant violated: {0}")]
    Internal(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
