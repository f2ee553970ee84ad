//! Deterministic long-term memory engine for conversational agents.
//!
//! Utterances are annotated into semantic anchors, distilled into structured
//! memory units, and stored in a per-space knowledge graph. Recall combines
//! semantic similarity, base-level activation, spreading activation over the
//! graph, preference tags, and emotional salience. Maintenance passes prune
//! semantic redundancy, resolve factual conflicts, reinforce well-trodden
//! paths, and forget low-retention memories gradually (pending-forget, then
//! soft deletion or compression — never silent hard deletion). A memory hub
//! routes requests between agents and exchanges permissioned, TTL-stamped
//! summary envelopes.
//!
//! Everything is deterministic given the inputs: the default embedder is a
//! trigram feature hasher, the annotator is rule-based, and all thresholds
//! live in [`config::EngineConfig`].

pub mod activation;
pub mod annotate;
pub mod config;
pub mod corpus;
pub mod embedding;
pub mod engine;
pub mod error;
pub mod forget;
pub mod graphstore;
pub mod hub;
pub mod prune;
pub mod reflect;
pub mod retrieve;
pub mod snapshot;
pub mod types;

pub use config::EngineConfig;
pub use engine::{Engine, IngestOutcome, QueryHit, SpaceStats};
pub use error::{Error, Result};
pub use types::{
    EdgeId, EmotionLabel, EmotionTag, Fact, LifecycleState, MemoryUnit, NodeId, Timestamp, UnitId,
};
