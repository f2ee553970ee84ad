//! The memory knowledge graph for one space: units, entity nodes, attributed
//! edges, the dialogue log, scenario-based node merging, and edge-failure
//! detection.
//!
//! One `Space` belongs to one user–agent pairing. Mutation goes through a
//! single writer; readers work off immutable clones or snapshots.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::annotate::UtteranceRole;
use crate::embedding::{cosine, normalize_text, EmbeddingProvider};
use crate::error::{Error, Result};
use crate::types::{EdgeId, LifecycleState, MemoryUnit, NodeId, Timestamp, UnitId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Entity,
    Event,
}

/// A knowledge-graph node: one entity (or event) surface form plus the units
/// that mention it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: NodeId,
    pub label: String,
    pub kind: NodeKind,
    pub unit_refs: BTreeSet<UnitId>,
    /// Labels folded into this node by similarity merges.
    pub aliases: BTreeSet<String>,
    pub created_at: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeValidity {
    Valid,
    Weakened,
    Failed,
}

/// An attributed, directed edge. Strength feeds spreading activation;
/// validity gates traversal (`Failed` edges are never traversed).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphEdge {
    pub id: EdgeId,
    pub head: NodeId,
    pub tail: NodeId,
    pub relation_label: String,
    pub source_units: BTreeSet<UnitId>,
    pub timestamp: Timestamp,
    pub emotion_weight: f64,
    pub strength: f64,
    pub validity: EdgeValidity,
}

impl GraphEdge {
    pub fn is_traversable(&self) -> bool {
        self.validity != EdgeValidity::Failed
    }

    pub(crate) fn fail(&mut self) {
        self.validity = EdgeValidity::Failed;
        self.strength = 0.0;
    }
}

/// One ingested utterance, kept for dialogue-chain analysis and the
/// full-history token baseline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub seq: u64,
    pub ref_id: String,
    pub speaker: String,
    pub ts: Timestamp,
    pub role: UtteranceRole,
    pub text: String,
    pub unit_ids: Vec<UnitId>,
}

/// Scalar space state carried by the snapshot's space record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct SpaceHeader {
    pub id: String,
    pub dim: usize,
    pub next_unit: u64,
    pub next_node: u64,
    pub next_edge: u64,
    pub generation: u64,
    pub version: u64,
    pub pending_since: Vec<(UnitId, Timestamp)>,
    pub traversal_counts: Vec<(EdgeId, u64)>,
    pub applied_envelopes: Vec<String>,
}

/// A node merge performed by [`Space::merge_similar_nodes`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MergeAction {
    pub survivor: NodeId,
    pub absorbed: NodeId,
    pub similarity: f64,
    pub alias: String,
}

/// One memory space: the full store for a user–agent pairing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Space {
    pub id: String,
    pub dim: usize,
    units: BTreeMap<UnitId, MemoryUnit>,
    nodes: BTreeMap<NodeId, GraphNode>,
    edges: BTreeMap<EdgeId, GraphEdge>,
    /// Normalized label (canonical or alias) → node.
    node_by_label: BTreeMap<String, NodeId>,
    /// First label/alias token → nodes, for query seed matching.
    #[serde(skip)]
    label_token_index: BTreeMap<String, BTreeSet<NodeId>>,
    /// Node → incident edges (both directions).
    #[serde(skip)]
    incident_index: BTreeMap<NodeId, BTreeSet<EdgeId>>,
    /// Dedup index over retrievable units: (content, fact key, fact value).
    unit_index: BTreeMap<(String, String, String), UnitId>,
    utterances: Vec<UtteranceRecord>,
    next_unit: u64,
    next_node: u64,
    next_edge: u64,
    /// Reflection-cycle counter.
    pub generation: u64,
    /// Mutation counter; guards against stale prune verdicts.
    pub version: u64,
    pending_since: BTreeMap<UnitId, Timestamp>,
    /// Edge traversals observed by retrieval since the last reflection.
    traversal_counts: BTreeMap<EdgeId, u64>,
    applied_envelopes: BTreeSet<String>,
}

impl Space {
    pub fn new(id: impl Into<String>, dim: usize) -> Self {
        Space {
            id: id.into(),
            dim,
            units: BTreeMap::new(),
            nodes: BTreeMap::new(),
            edges: BTreeMap::new(),
            node_by_label: BTreeMap::new(),
            label_token_index: BTreeMap::new(),
            incident_index: BTreeMap::new(),
            unit_index: BTreeMap::new(),
            utterances: Vec::new(),
            next_unit: 1,
            next_node: 1,
            next_edge: 1,
            generation: 0,
            version: 0,
            pending_since: BTreeMap::new(),
            traversal_counts: BTreeMap::new(),
            applied_envelopes: BTreeSet::new(),
        }
    }

    fn touch(&mut self) {
        self.version += 1;
    }

    fn first_token(label: &str) -> &str {
        label.split(' ').next().unwrap_or(label)
    }

    fn index_label(&mut self, label: &str, node: NodeId) {
        self.label_token_index
            .entry(Self::first_token(label).to_string())
            .or_default()
            .insert(node);
    }

    fn unindex_label(&mut self, label: &str, node: NodeId) {
        if let Some(set) = self.label_token_index.get_mut(Self::first_token(label)) {
            set.remove(&node);
            if set.is_empty() {
                self.label_token_index.remove(Self::first_token(label));
            }
        }
    }

    fn index_edge(&mut self, edge: EdgeId, head: NodeId, tail: NodeId) {
        self.incident_index.entry(head).or_default().insert(edge);
        self.incident_index.entry(tail).or_default().insert(edge);
    }

    fn dedup_key(unit: &MemoryUnit) -> (String, String, String) {
        let (k, v) = unit
            .fact
            .as_ref()
            .map(|f| (f.key.clone(), f.value.clone()))
            .unwrap_or_default();
        (unit.content.clone(), k, v)
    }

    /// Store a unit. Idempotent on identical normalized content and fact
    /// within this space: the existing id is returned and provenance, tags,
    /// and trace are merged. New units also materialize graph nodes for
    /// their strong entities and edges for their relations.
    pub fn upsert_unit(&mut self, mut unit: MemoryUnit) -> Result<UnitId> {
        if unit.space_id != self.id {
            return Err(Error::SpaceUnknown(unit.space_id));
        }
        debug_assert_eq!(unit.embedding.len(), self.dim);
        self.touch();
        let key = Self::dedup_key(&unit);
        if let Some(&existing_id) = self.unit_index.get(&key) {
            let existing = self
                .units
                .get_mut(&existing_id)
                .expect("index is consistent");
            for p in unit.provenance {
                if !existing.provenance.contains(&p) {
                    existing.provenance.push(p);
                }
            }
            existing.trace.merge(&unit.trace);
            existing.preference_tags.extend(unit.preference_tags);
            existing.emotion_weight = existing.emotion_weight.max(unit.emotion_weight);
            // Re-presentation re-activates a pending-forget unit.
            if existing.state == LifecycleState::PendingForget {
                existing.state = LifecycleState::Active;
                self.pending_since.remove(&existing_id);
            }
            return Ok(existing_id);
        }

        let id = UnitId(self.next_unit);
        self.next_unit += 1;
        unit.id = id;

        let strong: Vec<String> = unit.anchors.strong_entities().map(normalize_text).collect();
        for label in strong {
            let node = self.node_for_label(&label, unit.created_at);
            self.nodes
                .get_mut(&node)
                .expect("just resolved")
                .unit_refs
                .insert(id);
        }
        let relations = unit.anchors.relations.clone();
        for rel in relations {
            let head = self.node_for_label(&normalize_text(&rel.head), unit.created_at);
            let tail = self.node_for_label(&normalize_text(&rel.tail), unit.created_at);
            self.nodes
                .get_mut(&head)
                .expect("resolved")
                .unit_refs
                .insert(id);
            self.nodes
                .get_mut(&tail)
                .expect("resolved")
                .unit_refs
                .insert(id);
            let edge_id = EdgeId(self.next_edge);
            self.next_edge += 1;
            self.edges.insert(
                edge_id,
                GraphEdge {
                    id: edge_id,
                    head,
                    tail,
                    relation_label: rel.label.clone(),
                    source_units: BTreeSet::from([id]),
                    timestamp: unit.created_at,
                    emotion_weight: unit.emotion_weight,
                    strength: 1.0,
                    validity: EdgeValidity::Valid,
                },
            );
            self.index_edge(edge_id, head, tail);
        }

        self.unit_index.insert(key, id);
        self.units.insert(id, unit);
        Ok(id)
    }

    fn node_for_label(&mut self, label: &str, created_at: Timestamp) -> NodeId {
        if let Some(&id) = self.node_by_label.get(label) {
            return id;
        }
        let id = NodeId(self.next_node);
        self.next_node += 1;
        self.nodes.insert(
            id,
            GraphNode {
                id,
                label: label.to_string(),
                kind: NodeKind::Entity,
                unit_refs: BTreeSet::new(),
                aliases: BTreeSet::new(),
                created_at,
            },
        );
        self.node_by_label.insert(label.to_string(), id);
        self.index_label(label, id);
        id
    }

    pub fn record_utterance(&mut self, rec: UtteranceRecord) {
        self.touch();
        self.utterances.push(rec);
    }

    // ------------------------------------------------------------------
    // Lookups
    // ------------------------------------------------------------------

    pub fn unit(&self, id: UnitId) -> Option<&MemoryUnit> {
        self.units.get(&id)
    }

    pub(crate) fn unit_mut(&mut self, id: UnitId) -> Option<&mut MemoryUnit> {
        self.touch();
        self.units.get_mut(&id)
    }

    pub fn units(&self) -> impl Iterator<Item = &MemoryUnit> {
        self.units.values()
    }

    pub fn unit_count(&self) -> usize {
        self.units.len()
    }

    /// Units visible to retrieval: Active or PendingForget.
    pub fn retrievable_units(&self) -> impl Iterator<Item = &MemoryUnit> {
        self.units.values().filter(|u| u.state.is_retrievable())
    }

    pub fn node(&self, id: NodeId) -> Option<&GraphNode> {
        self.nodes.get(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &GraphNode> {
        self.nodes.values()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn resolve_label(&self, label: &str) -> Option<NodeId> {
        self.node_by_label.get(&normalize_text(label)).copied()
    }

    pub fn edge(&self, id: EdgeId) -> Option<&GraphEdge> {
        self.edges.get(&id)
    }

    pub fn edges(&self) -> impl Iterator<Item = &GraphEdge> {
        self.edges.values()
    }

    pub fn utterances(&self) -> &[UtteranceRecord] {
        &self.utterances
    }

    pub fn next_utterance_seq(&self) -> u64 {
        self.utterances.len() as u64 + 1
    }

    /// Whitespace tokens across the raw dialogue history.
    pub fn full_history_tokens(&self) -> usize {
        self.utterances
            .iter()
            .map(|u| u.text.split_whitespace().count())
            .sum()
    }

    /// Whitespace tokens across stored, non-soft-deleted unit content.
    pub fn store_tokens(&self) -> usize {
        self.units
            .values()
            .filter(|u| u.state != LifecycleState::SoftDeleted)
            .map(|u| u.token_count())
            .sum()
    }

    pub fn pending_since(&self, id: UnitId) -> Option<Timestamp> {
        self.pending_since.get(&id).copied()
    }

    pub(crate) fn set_pending(&mut self, id: UnitId, since: Timestamp) {
        self.pending_since.insert(id, since);
    }

    pub(crate) fn note_traversal(&mut self, edge: EdgeId) {
        *self.traversal_counts.entry(edge).or_insert(0) += 1;
    }

    pub(crate) fn take_traversal_counts(&mut self) -> BTreeMap<EdgeId, u64> {
        std::mem::take(&mut self.traversal_counts)
    }

    pub(crate) fn edge_mut(&mut self, id: EdgeId) -> Option<&mut GraphEdge> {
        self.touch();
        self.edges.get_mut(&id)
    }

    pub(crate) fn envelope_applied(&self, envelope_id: &str) -> bool {
        self.applied_envelopes.contains(envelope_id)
    }

    pub(crate) fn mark_envelope_applied(&mut self, envelope_id: &str) {
        self.applied_envelopes.insert(envelope_id.to_string());
    }

    // ------------------------------------------------------------------
    // Lifecycle
    // ------------------------------------------------------------------

    /// Apply a recorded retrieval access: appends to the trace (deduplicated
    /// by exact (unit, timestamp)) and re-activates pending-forget units.
    pub fn apply_access(&mut self, id: UnitId, now: Timestamp) -> Result<()> {
        self.touch();
        let unit = match self.units.get_mut(&id) {
            Some(u) => u,
            None => return Ok(()), // purged since the read; at-least-once semantics
        };
        if !unit.trace.has_event(now) {
            if now < unit.trace.last_access() {
                return Ok(()); // stale queued access, drop
            }
            unit.trace.record_access(now)?;
        }
        if unit.state == LifecycleState::PendingForget {
            unit.state = LifecycleState::Active;
            self.pending_since.remove(&id);
        }
        Ok(())
    }

    /// Retire a unit to SoftDeleted or Compressed, stepping through
    /// PendingForget when it is still Active. No-op when already retired.
    pub(crate) fn retire_unit(&mut self, id: UnitId, target: LifecycleState) {
        debug_assert!(matches!(
            target,
            LifecycleState::SoftDeleted | LifecycleState::Compressed
        ));
        self.touch();
        let Some(unit) = self.units.get_mut(&id) else {
            return;
        };
        if !unit.state.is_retrievable() {
            return;
        }
        unit.state = target;
        self.pending_since.remove(&id);
        self.unit_index.remove(&Self::dedup_key(unit));
    }

    /// Replace a unit's content and embedding, keeping the dedup index
    /// consistent.
    pub(crate) fn update_unit_content(&mut self, id: UnitId, content: String, embedding: Vec<f32>) {
        self.touch();
        let (old_key, new_key, retrievable) = {
            let Some(unit) = self.units.get_mut(&id) else {
                return;
            };
            let old_key = Self::dedup_key(unit);
            unit.content = content;
            unit.embedding = embedding;
            (old_key, Self::dedup_key(unit), unit.state.is_retrievable())
        };
        if old_key != new_key {
            if self.unit_index.get(&old_key) == Some(&id) {
                self.unit_index.remove(&old_key);
            }
            if retrievable {
                self.unit_index.entry(new_key).or_insert(id);
            }
        }
    }

    /// Undo a soft deletion: the unit returns to Active and its trace gains
    /// an access event at `now`.
    pub fn restore(&mut self, id: UnitId, now: Timestamp) -> Result<()> {
        self.touch();
        let unit = self.units.get_mut(&id).ok_or(Error::NotSoftDeleted(id.0))?;
        if unit.state != LifecycleState::SoftDeleted {
            return Err(Error::NotSoftDeleted(id.0));
        }
        unit.state = LifecycleState::Active;
        let last = unit.trace.last_access();
        unit.trace.record_access(now.max(last))?;
        let key = Self::dedup_key(unit);
        self.unit_index.entry(key).or_insert(id);
        Ok(())
    }

    /// Physically remove soft-deleted units (explicit purge only; nothing
    /// in the engine calls this automatically). Returns removed unit ids.
    pub fn purge_soft_deleted(&mut self) -> Vec<UnitId> {
        self.touch();
        let doomed: Vec<UnitId> = self
            .units
            .values()
            .filter(|u| u.state == LifecycleState::SoftDeleted)
            .map(|u| u.id)
            .collect();
        for id in &doomed {
            self.units.remove(id);
            self.pending_since.remove(id);
        }
        let doomed_set: BTreeSet<UnitId> = doomed.iter().copied().collect();
        for node in self.nodes.values_mut() {
            node.unit_refs.retain(|r| !doomed_set.contains(r));
        }
        let empty_nodes: Vec<NodeId> = self
            .nodes
            .values()
            .filter(|n| n.unit_refs.is_empty())
            .map(|n| n.id)
            .collect();
        for id in empty_nodes {
            if let Some(node) = self.nodes.remove(&id) {
                self.node_by_label.remove(&node.label);
                self.unindex_label(&node.label, id);
                for alias in &node.aliases {
                    self.node_by_label.remove(alias);
                    self.unindex_label(alias, id);
                }
            }
        }
        let dead_edges: Vec<EdgeId> = self
            .edges
            .values()
            .filter(|e| {
                e.source_units.iter().all(|u| doomed_set.contains(u))
                    || !self.nodes.contains_key(&e.head)
                    || !self.nodes.contains_key(&e.tail)
            })
            .map(|e| e.id)
            .collect();
        for id in dead_edges {
            if let Some(edge) = self.edges.remove(&id) {
                for endpoint in [edge.head, edge.tail] {
                    if let Some(set) = self.incident_index.get_mut(&endpoint) {
                        set.remove(&id);
                        if set.is_empty() {
                            self.incident_index.remove(&endpoint);
                        }
                    }
                }
            }
            self.traversal_counts.remove(&id);
        }
        doomed
    }

    // ------------------------------------------------------------------
    // Dynamic maintenance
    // ------------------------------------------------------------------

    /// Merge nodes of the same kind whose label embeddings reach
    /// `threshold` cosine similarity. Pairs are processed by descending
    /// similarity (ties by ascending ids); each connected component
    /// collapses into its earliest-created node. Idempotent at a fixed
    /// threshold: a second pass finds nothing to merge.
    pub fn merge_similar_nodes(
        &mut self,
        threshold: f64,
        embedder: &dyn EmbeddingProvider,
    ) -> Result<Vec<MergeAction>> {
        self.touch();
        let labeled: Vec<(NodeId, NodeKind, Vec<f32>)> = {
            let mut v = Vec::with_capacity(self.nodes.len());
            for node in self.nodes.values() {
                v.push((node.id, node.kind, embedder.embed(&node.label)?));
            }
            v
        };
        let mut pairs: Vec<(f64, NodeId, NodeId)> = Vec::new();
        for i in 0..labeled.len() {
            for j in (i + 1)..labeled.len() {
                if labeled[i].1 != labeled[j].1 {
                    continue;
                }
                let sim = cosine(&labeled[i].2, &labeled[j].2)?;
                if sim >= threshold {
                    pairs.push((sim, labeled[i].0, labeled[j].0));
                }
            }
        }
        pairs.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .expect("cosine is finite")
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });

        let mut root: BTreeMap<NodeId, NodeId> = BTreeMap::new();
        fn find(root: &mut BTreeMap<NodeId, NodeId>, id: NodeId) -> NodeId {
            let mut cur = id;
            while let Some(&parent) = root.get(&cur) {
                if parent == cur {
                    break;
                }
                cur = parent;
            }
            cur
        }

        let mut actions = Vec::new();
        for (sim, a, b) in pairs {
            let ra = find(&mut root, a);
            let rb = find(&mut root, b);
            if ra == rb {
                continue;
            }
            let (survivor, absorbed) = if ra < rb { (ra, rb) } else { (rb, ra) };
            root.insert(absorbed, survivor);
            root.insert(survivor, survivor);

            let absorbed_node = self.nodes.remove(&absorbed).expect("absorbed exists");
            let refs = absorbed_node.unit_refs.clone();
            let alias_label = absorbed_node.label.clone();
            {
                let surv = self.nodes.get_mut(&survivor).expect("survivor exists");
                surv.unit_refs.extend(refs);
                surv.aliases.insert(absorbed_node.label.clone());
                surv.aliases.extend(absorbed_node.aliases.iter().cloned());
            }
            self.node_by_label
                .insert(absorbed_node.label.clone(), survivor);
            self.unindex_label(&absorbed_node.label, absorbed);
            self.index_label(&absorbed_node.label, survivor);
            for alias in &absorbed_node.aliases {
                self.node_by_label.insert(alias.clone(), survivor);
                self.unindex_label(alias, absorbed);
                self.index_label(alias, survivor);
            }
            let moved: Vec<EdgeId> = self
                .incident_index
                .remove(&absorbed)
                .unwrap_or_default()
                .into_iter()
                .collect();
            for edge_id in moved {
                let edge = self.edges.get_mut(&edge_id).expect("indexed edge exists");
                if edge.head == absorbed {
                    edge.head = survivor;
                }
                if edge.tail == absorbed {
                    edge.tail = survivor;
                }
                if edge.head == edge.tail && edge.validity != EdgeValidity::Failed {
                    // Merging aliases turned this into a self-loop.
                    edge.fail();
                }
                self.incident_index
                    .entry(survivor)
                    .or_default()
                    .insert(edge_id);
            }
            actions.push(MergeAction {
                survivor,
                absorbed,
                similarity: sim,
                alias: alias_label,
            });
        }
        Ok(actions)
    }

    /// Fail edges that (a) lost a latest-wins race on a functional relation,
    /// or (b) whose source units are all soft-deleted. Only edges stamped at
    /// or before `now` participate. Returns the newly failed edge ids.
    pub fn detect_failed_edges(
        &mut self,
        now: Timestamp,
        functional: &BTreeSet<String>,
    ) -> Vec<EdgeId> {
        self.touch();
        let mut failed: Vec<EdgeId> = Vec::new();

        // (a) newest edge per (head, functional label) wins; older edges to
        // a different tail fail.
        type FunctionalGroup = Vec<(Timestamp, EdgeId, NodeId)>;
        let mut groups: BTreeMap<(NodeId, &str), FunctionalGroup> = BTreeMap::new();
        for edge in self.edges.values() {
            if edge.timestamp > now || !edge.is_traversable() {
                continue;
            }
            if functional.contains(&edge.relation_label) {
                groups
                    .entry((edge.head, edge.relation_label.as_str()))
                    .or_default()
                    .push((edge.timestamp, edge.id, edge.tail));
            }
        }
        for (_, mut members) in groups {
            members.sort_unstable_by_key(|(ts, id, _)| (*ts, *id));
            let (_, _, newest_tail) = *members.last().expect("group non-empty");
            for (_, id, tail) in members.iter().take(members.len() - 1) {
                if *tail != newest_tail {
                    failed.push(*id);
                }
            }
        }

        // (b) edges orphaned by soft deletion.
        for edge in self.edges.values() {
            if edge.timestamp > now || !edge.is_traversable() {
                continue;
            }
            let orphaned = edge.source_units.iter().all(|u| {
                matches!(
                    self.units.get(u).map(|x| x.state),
                    Some(LifecycleState::SoftDeleted)
                )
            });
            if orphaned && !failed.contains(&edge.id) {
                failed.push(edge.id);
            }
        }

        for id in &failed {
            self.edges.get_mut(id).expect("edge exists").fail();
        }
        failed.sort_unstable();
        failed
    }

    // ------------------------------------------------------------------
    // Snapshot support
    // ------------------------------------------------------------------

    pub(crate) fn header(&self) -> SpaceHeader {
        SpaceHeader {
            id: self.id.clone(),
            dim: self.dim,
            next_unit: self.next_unit,
            next_node: self.next_node,
            next_edge: self.next_edge,
            generation: self.generation,
            version: self.version,
            pending_since: self.pending_since.iter().map(|(k, v)| (*k, *v)).collect(),
            traversal_counts: self
                .traversal_counts
                .iter()
                .map(|(k, v)| (*k, *v))
                .collect(),
            applied_envelopes: self.applied_envelopes.iter().cloned().collect(),
        }
    }

    /// Rebuild a space from snapshot records, reconstructing the derived
    /// indexes and checking referential integrity.
    pub(crate) fn assemble(
        header: SpaceHeader,
        units: Vec<MemoryUnit>,
        nodes: Vec<GraphNode>,
        edges: Vec<GraphEdge>,
        utterances: Vec<UtteranceRecord>,
    ) -> Result<Self> {
        let mut space = Space::new(header.id.clone(), header.dim);
        space.next_unit = header.next_unit;
        space.next_node = header.next_node;
        space.next_edge = header.next_edge;
        space.generation = header.generation;
        space.version = header.version;
        space.pending_since = header.pending_since.into_iter().collect();
        space.traversal_counts = header.traversal_counts.into_iter().collect();
        space.applied_envelopes = header.applied_envelopes.into_iter().collect();
        for node in nodes {
            space.node_by_label.insert(node.label.clone(), node.id);
            space.index_label(&node.label.clone(), node.id);
            for alias in &node.aliases.clone() {
                space.node_by_label.insert(alias.clone(), node.id);
                space.index_label(alias, node.id);
            }
            space.nodes.insert(node.id, node);
        }
        for unit in units {
            if unit.space_id != space.id {
                return Err(Error::CorruptSnapshot(format!(
                    "unit {} belongs to space {:?}, found in {:?}",
                    unit.id, unit.space_id, space.id
                )));
            }
            if unit.state.is_retrievable() {
                space.unit_index.insert(Self::dedup_key(&unit), unit.id);
            }
            space.units.insert(unit.id, unit);
        }
        for edge in edges {
            if !space.nodes.contains_key(&edge.head) || !space.nodes.contains_key(&edge.tail) {
                return Err(Error::CorruptSnapshot(format!(
                    "edge {} references a missing node",
                    edge.id
                )));
            }
            space.index_edge(edge.id, edge.head, edge.tail);
            space.edges.insert(edge.id, edge);
        }
        for node in space.nodes.values() {
            for unit_ref in &node.unit_refs {
                if !space.units.contains_key(unit_ref) {
                    return Err(Error::CorruptSnapshot(format!(
                        "node {} references missing unit {unit_ref}",
                        node.id
                    )));
                }
            }
        }
        space.utterances = utterances;
        space.utterances.sort_by_key(|u| u.seq);
        Ok(space)
    }

    /// Edges usable for traversal (Valid or Weakened), incident to `node`,
    /// in both directions, ascending by id.
    pub fn incident_edges(&self, node: NodeId) -> impl Iterator<Item = &GraphEdge> {
        self.incident_index
            .get(&node)
            .into_iter()
            .flatten()
            .filter_map(move |id| self.edges.get(id))
            .filter(|e| e.is_traversable())
    }

    /// Outgoing usable edges of `node`, ascending by id.
    pub fn outgoing_edges(&self, node: NodeId) -> impl Iterator<Item = &GraphEdge> {
        self.incident_edges(node).filter(move |e| e.head == node)
    }

    /// Nodes whose label or alias starts with `token`, for seed matching.
    pub fn nodes_with_first_token(&self, token: &str) -> impl Iterator<Item = &GraphNode> {
        self.label_token_index
            .get(token)
            .into_iter()
            .flatten()
            .filter_map(move |id| self.nodes.get(id))
    }
}
