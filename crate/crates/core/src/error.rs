//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the memory engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("text is empty after normalization")]
    EmptyText,

    #[error("utterance is empty")]
    EmptyUtterance,

    #[error("vector dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("retrieval history is empty")]
    EmptyHistory,

    #[error("clock skew: access at {now} precedes last access at {last}")]
    ClockSkew { now: u64, last: u64 },

    #[error("unknown memory space: {0}")]
    SpaceUnknown(String),

    #[error("unknown graph node: {0}")]
    UnknownNode(String),

    #[error(
        "verdicts are stale: store changed since classification (version {expected} vs {actual})"
    )]
    StaleVerdicts { expected: u64, actual: u64 },

    #[error("unit {0} is not soft-deleted")]
    NotSoftDeleted(u64),

    #[error("agent already registered: {0}")]
    DuplicateAgent(String),

    #[error("no agents registered")]
    NoAgents,

    #[error("no shareable units match the requested topic")]
    EmptySelection,

    #[error("envelope permissions do not admit agent {0}")]
    PermissionDenied(String),

    #[error("envelope expired at {valid_until}, now is {now}")]
    Expired { valid_until: u64, now: u64 },

    #[error("snapshot corrupt: {0}")]
    CorruptSnapshot(String),

    #[error("snapshot format version {0} is not supported")]
    VersionUnsupported(u32),

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
