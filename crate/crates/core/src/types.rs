//! Shared domain types: time, identifiers, emotion tags, lifecycle states,
//! and the memory unit itself.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::activation::ActivationTrace;
use crate::annotate::SemanticAnchorSet;

/// Seconds since the Unix epoch. All engine time is integer seconds;
/// ages are clamped at 1 s before they feed the activation equations,
/// which keeps `t^{-d}` finite at `t = 0`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub fn as_secs(self) -> u64 {
        self.0
    }

    /// Seconds elapsed since `earlier`, saturating at zero.
    pub fn since(self, earlier: Timestamp) -> u64 {
        self.0.saturating_sub(earlier.0)
    }

    pub fn plus(self, secs: u64) -> Timestamp {
        Timestamp(self.0 + secs)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

macro_rules! id_newtype {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u64);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_newtype!(
    /// Identifier of a memory unit, unique within its space.
    UnitId
);
id_newtype!(
    /// Identifier of a knowledge-graph node, unique within its space.
    NodeId
);
id_newtype!(
    /// Identifier of a knowledge-graph edge, unique within its space.
    EdgeId
);

/// Emotion classes recognized by the annotator's lexicon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmotionLabel {
    Neutral,
    Positive,
    Negative,
    Anxious,
    Frustrated,
    Excited,
}

/// An emotion classification with a strength in `[0, 1]`.
/// `Neutral` always carries intensity 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmotionTag {
    pub label: EmotionLabel,
    pub intensity: f64,
}

impl EmotionTag {
    pub fn neutral() -> Self {
        EmotionTag {
            label: EmotionLabel::Neutral,
            intensity: 0.0,
        }
    }

    pub fn new(label: EmotionLabel, intensity: f64) -> Self {
        if label == EmotionLabel::Neutral {
            return Self::neutral();
        }
        EmotionTag {
            label,
            intensity: intensity.clamp(0.0, 1.0),
        }
    }
}

impl Default for EmotionTag {
    fn default() -> Self {
        Self::neutral()
    }
}

/// Lifecycle of a memory unit.
///
/// Transitions move only along
/// `Active -> PendingForget -> {SoftDeleted, Compressed}`, with the single
/// reverse arc `PendingForget -> Active` on re-access. Maintenance passes
/// that retire an `Active` unit step through `PendingForget` in place.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LifecycleState {
    Active,
    PendingForget,
    SoftDeleted,
    Compressed,
}

impl LifecycleState {
    /// Whether one forward step from `self` to `next` is legal.
    pub fn can_step(self, next: LifecycleState) -> bool {
        use LifecycleState::*;
        matches!(
            (self, next),
            (Active, PendingForget)
                | (PendingForget, SoftDeleted)
                | (PendingForget, Compressed)
                | (PendingForget, Active)
        )
    }

    /// Retrievable states. SoftDeleted and Compressed units never appear
    /// in retrieval results.
    pub fn is_retrievable(self) -> bool {
        matches!(self, LifecycleState::Active | LifecycleState::PendingForget)
    }
}

/// One extracted fact: a stable key naming what the fact is about and the
/// value it asserts. Keys drive deduplication, supersession, and sharing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fact {
    pub key: String,
    pub value: String,
}

impl Fact {
    pub fn statement(&self) -> String {
        format!("{} = {}", self.key, self.value)
    }
}

/// The smallest stored memory fragment: one normalized utterance carrying at
/// most one fact, with its anchors, embedding, retrieval trace, and
/// lifecycle state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MemoryUnit {
    pub id: UnitId,
    pub space_id: String,
    /// Normalized text of the carrier utterance (or a summary line once
    /// compressed).
    pub content: String,
    /// The fact this unit asserts; `None` for verbatim dialogue units
    /// (questions, acknowledgments, chit-chat).
    pub fact: Option<Fact>,
    pub anchors: SemanticAnchorSet,
    /// L2-normalized embedding of `content`, dimension fixed per space.
    pub embedding: Vec<f32>,
    pub created_at: Timestamp,
    pub trace: ActivationTrace,
    /// Emotional salience in `[0, 1]`; emotionally weighted units resist
    /// soft deletion and rank higher in retrieval.
    pub emotion_weight: f64,
    /// Explicit user tags ("pinned", "private", stated preferences).
    pub preference_tags: std::collections::BTreeSet<String>,
    pub state: LifecycleState,
    /// Opaque source references (utterance ids, or origin unit ids for
    /// memories received from another agent). Never empty; merging unions.
    pub provenance: Vec<String>,
    /// Set when a newer unit superseded this one (compression keeps the
    /// pointer so the old record still resolves to the current value).
    pub superseded_by: Option<UnitId>,
    /// Set when this unit was folded into another during deduplication.
    pub merged_into: Option<UnitId>,
}

impl MemoryUnit {
    pub fn fact_key(&self) -> Option<&str> {
        self.fact.as_ref().map(|f| f.key.as_str())
    }

    /// Whitespace token count of the stored content; the engine's
    /// model-agnostic token metric.
    pub fn token_count(&self) -> usize {
        self.content.split_whitespace().count()
    }

    pub fn is_pinned(&self) -> bool {
        self.preference_tags.contains("pinned")
    }

    pub fn is_private(&self) -> bool {
        self.preference_tags.contains("private")
    }
}
