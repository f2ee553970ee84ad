//! Multi-agent memory coordination: agent registration with responsibility
//! domains, request routing, summary-level share envelopes, and permissioned
//! application of shared memories.
//!
//! Sharing is minimized: envelopes are built only on demand, carry one
//! summary line per fact key (never raw unit dumps), and are stamped with
//! origin, temporal validity, and permissions. Units tagged "private" never
//! leave their space.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::activation::ActivationTrace;
use crate::annotate::SemanticAnchorSet;
use crate::embedding::{normalize_text, EmbeddingProvider};
use crate::error::{Error, Result};
use crate::graphstore::Space;
use crate::types::{Fact, LifecycleState, MemoryUnit, Timestamp, UnitId};

pub const ENVELOPE_FORMAT_VERSION: u32 = 1;

/// An agent known to the hub.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub agent_id: String,
    /// Topic tags this agent is responsible for. Never empty.
    pub responsibility_domain: BTreeSet<String>,
    /// Request kinds the agent serves.
    pub behavior_interface: BTreeSet<String>,
    pub space_id: String,
}

/// Who may apply an envelope.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", content = "tags")]
pub enum SharePermissions {
    Public,
    DomainRestricted(BTreeSet<String>),
    /// Constructed for audit only; never transmitted or applicable.
    Private,
}

/// One per-fact summary inside an envelope. The summary text is the fact's
/// current value; transmission cost is measured over it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryUnit {
    pub fact_key: String,
    pub summary: String,
    pub embedding: Vec<f32>,
    /// Timestamp of the unit that contributed the value; drives the
    /// no-overwrite-newer rule on application.
    pub as_of: Timestamp,
    pub origin_refs: Vec<String>,
}

/// A summary-level memory package exchanged between agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareEnvelope {
    pub version: u32,
    /// Content hash; application is idempotent per id.
    pub envelope_id: String,
    pub origin_agent: String,
    pub topic_tags: BTreeSet<String>,
    pub summary_units: Vec<SummaryUnit>,
    pub origin_refs: Vec<String>,
    pub valid_until: Timestamp,
    pub permissions: SharePermissions,
}

impl ShareEnvelope {
    /// Whitespace tokens across transmitted summaries.
    pub fn token_count(&self) -> usize {
        self.summary_units
            .iter()
            .map(|s| s.summary.split_whitespace().count())
            .sum()
    }
}

/// Outcome of applying an envelope to a space.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApplyReport {
    pub accepted: usize,
    pub rejected_expired: usize,
    pub rejected_conflict: usize,
    /// The envelope had already been applied to this space.
    pub already_applied: bool,
}

/// The agent registry and router.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Hub {
    agents: BTreeMap<String, AgentProfile>,
}

impl Hub {
    pub fn new() -> Self {
        Hub::default()
    }

    pub fn register_agent(&mut self, profile: AgentProfile) -> Result<()> {
        if profile.responsibility_domain.is_empty() {
            return Err(Error::ConfigInvalid(format!(
                "agent {} has an empty responsibility domain",
                profile.agent_id
            )));
        }
        if self.agents.contains_key(&profile.agent_id) {
            return Err(Error::DuplicateAgent(profile.agent_id));
        }
        self.agents.insert(profile.agent_id.clone(), profile);
        Ok(())
    }

    pub fn agent(&self, id: &str) -> Option<&AgentProfile> {
        self.agents.get(id)
    }

    pub fn agents(&self) -> impl Iterator<Item = &AgentProfile> {
        self.agents.values()
    }

    /// Route a request to the agent with maximal Jaccard overlap between the
    /// request tags and its responsibility domain; ties (including all-zero
    /// overlap) go to the lowest agent id.
    pub fn route(&self, request_tags: &BTreeSet<String>) -> Result<&AgentProfile> {
        if self.agents.is_empty() {
            return Err(Error::NoAgents);
        }
        let best = self
            .agents
            .values()
            .map(|a| {
                let overlap = crate::retrieve::tag_overlap(request_tags, &a.responsibility_domain);
                (a, overlap)
            })
            .max_by(|(a1, o1), (a2, o2)| {
                o1.partial_cmp(o2)
                    .expect("overlap is finite")
                    .then(a2.agent_id.cmp(&a1.agent_id)) // reversed: lower id wins ties
            })
            .map(|(a, _)| a)
            .expect("non-empty");
        Ok(best)
    }
}

fn unit_topics(unit: &MemoryUnit) -> BTreeSet<String> {
    let mut topics: BTreeSet<String> = unit.preference_tags.clone();
    for entity in unit.anchors.strong_entities() {
        topics.insert(normalize_text(entity));
    }
    if let Some(fact) = &unit.fact {
        for word in fact.key.split_whitespace() {
            topics.insert(word.to_string());
        }
    }
    topics
}

/// Build a share envelope over `space`: Active units matching the topic
/// tags, private units excluded, one summary per fact key carrying the
/// newest value. Triggered only on demand; there is no background
/// broadcast.
pub fn summarize_for_share(
    space: &Space,
    origin_agent: &str,
    topic_tags: &BTreeSet<String>,
    permissions: SharePermissions,
    now: Timestamp,
    ttl_secs: u64,
    embedder: &dyn EmbeddingProvider,
) -> Result<ShareEnvelope> {
    let mut by_key: BTreeMap<&str, Vec<&MemoryUnit>> = BTreeMap::new();
    for unit in space.units() {
        if unit.state != LifecycleState::Active || unit.is_private() {
            continue;
        }
        let Some(fact) = &unit.fact else { continue };
        let topics = unit_topics(unit);
        if topic_tags.iter().any(|t| topics.contains(t)) {
            by_key.entry(fact.key.as_str()).or_default().push(unit);
        }
    }
    if by_key.is_empty() {
        return Err(Error::EmptySelection);
    }

    let mut summary_units = Vec::with_capacity(by_key.len());
    let mut origin_refs: Vec<String> = Vec::new();
    for (key, members) in by_key {
        let newest = members
            .iter()
            .max_by_key(|u| (u.created_at, u.id))
            .expect("group non-empty");
        let value = newest.fact.as_ref().expect("fact units only").value.clone();
        let refs: Vec<String> = members
            .iter()
            .map(|u| format!("{origin_agent}/unit/{}", u.id))
            .collect();
        origin_refs.extend(refs.iter().cloned());
        summary_units.push(SummaryUnit {
            fact_key: key.to_string(),
            embedding: embedder.embed(&value)?,
            summary: value,
            as_of: newest.created_at,
            origin_refs: refs,
        });
    }

    let envelope_id = {
        let mut hasher = Sha256::new();
        hasher.update(origin_agent.as_bytes());
        for s in &summary_units {
            hasher.update(s.fact_key.as_bytes());
            hasher.update([0]);
            hasher.update(s.summary.as_bytes());
            hasher.update(s.as_of.0.to_le_bytes());
        }
        hasher.update(format!("{permissions:?}").as_bytes());
        hex_digest(hasher)
    };

    Ok(ShareEnvelope {
        version: ENVELOPE_FORMAT_VERSION,
        envelope_id,
        origin_agent: origin_agent.to_string(),
        topic_tags: topic_tags.clone(),
        summary_units,
        origin_refs,
        valid_until: now.plus(ttl_secs),
        permissions,
    })
}

fn hex_digest(hasher: Sha256) -> String {
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Apply an envelope to the target agent's space.
///
/// Permission is checked against the target's responsibility domain;
/// expired envelopes are rejected whole; per summary, a newer local unit
/// for the same fact key wins (no overwrite). Idempotent per envelope id.
pub fn apply_shared(
    space: &mut Space,
    envelope: &ShareEnvelope,
    target: &AgentProfile,
    now: Timestamp,
    embedder: &dyn EmbeddingProvider,
) -> Result<ApplyReport> {
    if envelope.version != ENVELOPE_FORMAT_VERSION {
        return Err(Error::VersionUnsupported(envelope.version));
    }
    match &envelope.permissions {
        SharePermissions::Public => {}
        SharePermissions::Private => return Err(Error::PermissionDenied(target.agent_id.clone())),
        SharePermissions::DomainRestricted(tags) => {
            if tags.is_disjoint(&target.responsibility_domain) {
                return Err(Error::PermissionDenied(target.agent_id.clone()));
            }
        }
    }
    if now > envelope.valid_until {
        return Err(Error::Expired {
            valid_until: envelope.valid_until.0,
            now: now.0,
        });
    }
    if space.envelope_applied(&envelope.envelope_id) {
        return Ok(ApplyReport {
            already_applied: true,
            ..ApplyReport::default()
        });
    }

    let mut report = ApplyReport::default();
    for summary in &envelope.summary_units {
        // Newest local unit for this key, if any.
        let newer_local = space
            .retrievable_units()
            .filter(|u| u.fact_key() == Some(summary.fact_key.as_str()))
            .map(|u| u.created_at)
            .max()
            .map(|t| t > summary.as_of)
            .unwrap_or(false);
        if newer_local {
            report.rejected_conflict += 1;
            continue;
        }
        let content = normalize_text(&format!("{} = {}", summary.fact_key, summary.summary));
        let mut anchors = SemanticAnchorSet::empty();
        anchors.facts.push(Fact {
            key: summary.fact_key.clone(),
            value: summary.summary.clone(),
        });
        let unit = MemoryUnit {
            id: UnitId(0),
            space_id: space.id.clone(),
            embedding: embedder.embed(&content)?,
            content,
            fact: Some(Fact {
                key: summary.fact_key.clone(),
                value: summary.summary.clone(),
            }),
            anchors,
            created_at: summary.as_of,
            trace: ActivationTrace::new(summary.as_of),
            emotion_weight: 0.0,
            preference_tags: envelope.topic_tags.clone(),
            state: LifecycleState::Active,
            provenance: summary.origin_refs.clone(),
            superseded_by: None,
            merged_into: None,
        };
        space.upsert_unit(unit)?;
        report.accepted += 1;
    }
    space.mark_envelope_applied(&envelope.envelope_id);
    Ok(report)
}
