//! The engine facade: ingestion pipeline, query path, maintenance passes,
//! hub operations, and statistics over a set of memory spaces.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::annotate::{generate_units, verbatim_unit, Annotator, AnnotatorRules, UtteranceRole};
use crate::config::EngineConfig;
use crate::corpus::Corpus;
use crate::embedding::HashEmbedder;
use crate::error::{Error, Result};
use crate::forget::{sweep, ForgetReport};
use crate::graphstore::{MergeAction, Space, UtteranceRecord};
use crate::hub::{
    apply_shared, summarize_for_share, AgentProfile, ApplyReport, Hub, ShareEnvelope,
    SharePermissions,
};
use crate::prune::{prune_pass, PruneReport};
use crate::reflect::{run_reflection_cycle, FeedbackEntry, ReflectionReport};
use crate::retrieve::{multi_hop_path, retrieve_topk, score_all, RetrievalHit};
use crate::types::{EdgeId, Fact, LifecycleState, Timestamp, UnitId};

/// Result of ingesting one utterance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestOutcome {
    pub utterance_ref: String,
    pub role: UtteranceRole,
    pub unit_ids: Vec<UnitId>,
}

/// One query answer, resolved for transport.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryHit {
    pub unit_id: UnitId,
    pub score: f64,
    pub content: String,
    pub fact: Option<Fact>,
    pub path: Vec<EdgeId>,
}

/// Store counters for `/stats`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SpaceStats {
    pub units_total: usize,
    pub units_active: usize,
    pub units_pending: usize,
    pub units_soft_deleted: usize,
    pub units_compressed: usize,
    pub nodes: usize,
    pub edges: usize,
    pub edges_failed: usize,
    pub generation: u64,
    pub store_tokens: usize,
    pub full_history_tokens: usize,
}

/// The deterministic long-term memory engine.
pub struct Engine {
    config: EngineConfig,
    annotator: Annotator,
    embedder: HashEmbedder,
    spaces: BTreeMap<String, Space>,
    hub: Hub,
}

impl Engine {
    pub fn new(config: EngineConfig) -> Result<Self> {
        config.validate()?;
        let mut rules = AnnotatorRules::embedded();
        if !config.gazetteer_path.is_empty() {
            rules.load_gazetteer_file(std::path::Path::new(&config.gazetteer_path))?;
        }
        if !config.lexicon_path.is_empty() {
            rules.load_lexicon_file(std::path::Path::new(&config.lexicon_path))?;
        }
        Ok(Engine {
            embedder: HashEmbedder::new(config.dim),
            annotator: Annotator::new(rules),
            config,
            spaces: BTreeMap::new(),
            hub: Hub::new(),
        })
    }

    pub fn with_defaults() -> Self {
        Engine::new(EngineConfig::default()).expect("default configuration is valid")
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn annotator(&self) -> &Annotator {
        &self.annotator
    }

    pub fn embedder(&self) -> &HashEmbedder {
        &self.embedder
    }

    pub fn hub(&self) -> &Hub {
        &self.hub
    }

    // ------------------------------------------------------------------
    // Spaces
    // ------------------------------------------------------------------

    pub fn ensure_space(&mut self, id: &str) -> &mut Space {
        let dim = self.config.dim;
        self.spaces
            .entry(id.to_string())
            .or_insert_with(|| Space::new(id, dim))
    }

    pub fn space(&self, id: &str) -> Result<&Space> {
        self.spaces
            .get(id)
            .ok_or_else(|| Error::SpaceUnknown(id.to_string()))
    }

    pub fn space_mut(&mut self, id: &str) -> Result<&mut Space> {
        self.spaces
            .get_mut(id)
            .ok_or_else(|| Error::SpaceUnknown(id.to_string()))
    }

    pub fn space_ids(&self) -> impl Iterator<Item = &str> {
        self.spaces.keys().map(|s| s.as_str())
    }

    pub(crate) fn spaces(&self) -> &BTreeMap<String, Space> {
        &self.spaces
    }

    pub(crate) fn restore_state(&mut self, spaces: BTreeMap<String, Space>, hub: Hub) {
        self.spaces = spaces;
        self.hub = hub;
    }

    // ------------------------------------------------------------------
    // Ingestion
    // ------------------------------------------------------------------

    /// Ingest one utterance: annotate, generate structured units (or a
    /// verbatim unit when no fact emerges), upsert, and log the turn.
    /// Creates the space on first use. Timestamps must be monotone
    /// non-decreasing within a space.
    pub fn ingest(
        &mut self,
        space_id: &str,
        utterance: &str,
        speaker: &str,
        ts: Timestamp,
    ) -> Result<IngestOutcome> {
        let annotator = self.annotator.clone();
        let embedder = self.embedder.clone();
        let space = self.ensure_space(space_id);

        if let Some(last) = space.utterances().last() {
            if ts < last.ts {
                return Err(Error::ClockSkew {
                    now: ts.0,
                    last: last.ts.0,
                });
            }
        }

        let seq = space.next_utterance_seq();
        let ref_id = format!("utt:{space_id}:{seq}");
        let context: Vec<String> = {
            let utts = space.utterances();
            let start = utts.len().saturating_sub(4);
            utts[start..].iter().map(|u| u.text.clone()).collect()
        };
        let anchors = annotator.annotate(utterance, &context)?;
        let role = annotator.role(utterance);
        let tags = annotator.preference_tags(utterance);

        let mut units =
            generate_units(&anchors, utterance, &ref_id, ts, space_id, &tags, &embedder)?;
        if units.is_empty() {
            units.push(verbatim_unit(
                &anchors, utterance, &ref_id, ts, space_id, &tags, &embedder,
            )?);
        }
        let mut unit_ids = Vec::with_capacity(units.len());
        for unit in units {
            unit_ids.push(space.upsert_unit(unit)?);
        }
        space.record_utterance(UtteranceRecord {
            seq,
            ref_id: ref_id.clone(),
            speaker: speaker.to_string(),
            ts,
            role,
            text: utterance.to_string(),
            unit_ids: unit_ids.clone(),
        });
        Ok(IngestOutcome {
            utterance_ref: ref_id,
            role,
            unit_ids,
        })
    }

    /// Ingest a generated corpus into a space.
    pub fn ingest_corpus(&mut self, space_id: &str, corpus: &Corpus) -> Result<usize> {
        for utt in &corpus.utterances {
            self.ingest(space_id, &utt.utterance, &utt.speaker, Timestamp(utt.ts))?;
        }
        Ok(corpus.utterances.len())
    }

    // ------------------------------------------------------------------
    // Query
    // ------------------------------------------------------------------

    /// Top-k retrieval with the access side effect applied.
    pub fn query(
        &mut self,
        space_id: &str,
        text: &str,
        k: usize,
        tags: &BTreeSet<String>,
        now: Timestamp,
    ) -> Result<Vec<QueryHit>> {
        let weights = self.config.scoring;
        let params = self.config.activation;
        let embedder = self.embedder.clone();
        let space = self.space_mut(space_id)?;
        let hits = retrieve_topk(space, text, k, now, &weights, tags, &params, &embedder)?;
        Ok(resolve_hits(space, hits))
    }

    /// Score without side effects (concurrent read path); pair with
    /// [`Engine::apply_accesses`].
    pub fn score(
        &self,
        space_id: &str,
        text: &str,
        k: usize,
        tags: &BTreeSet<String>,
        now: Timestamp,
    ) -> Result<Vec<QueryHit>> {
        let space = self.space(space_id)?;
        let mut hits = score_all(
            space,
            text,
            now,
            &self.config.scoring,
            tags,
            &self.config.activation,
            &self.embedder,
        )?;
        hits.truncate(k);
        Ok(resolve_hits(space, hits))
    }

    /// Apply batched access records from the read path. At-least-once with
    /// (unit, timestamp) deduplication.
    pub fn apply_accesses(
        &mut self,
        space_id: &str,
        accesses: &[(UnitId, Timestamp)],
    ) -> Result<()> {
        let space = self.space_mut(space_id)?;
        for (unit, ts) in accesses {
            space.apply_access(*unit, *ts)?;
        }
        Ok(())
    }

    /// All simple paths between two entities.
    pub fn multi_hop(
        &self,
        space_id: &str,
        entity_a: &str,
        entity_b: &str,
        max_hops: usize,
    ) -> Result<Vec<Vec<EdgeId>>> {
        multi_hop_path(self.space(space_id)?, entity_a, entity_b, max_hops)
    }

    // ------------------------------------------------------------------
    // Maintenance
    // ------------------------------------------------------------------

    pub fn sweep_space(
        &mut self,
        space_id: &str,
        now: Timestamp,
        dry_run: bool,
    ) -> Result<ForgetReport> {
        let params = self.config.activation;
        let forgetting = self.config.forgetting.clone();
        let space = self.space_mut(space_id)?;
        if dry_run {
            let mut clone = space.clone();
            sweep(&mut clone, now, &params, &forgetting)
        } else {
            sweep(space, now, &params, &forgetting)
        }
    }

    pub fn prune_space(&mut self, space_id: &str, now: Timestamp) -> Result<PruneReport> {
        let config = self.config.clone();
        prune_pass(self.space_mut(space_id)?, now, &config)
    }

    pub fn reflect_space(
        &mut self,
        space_id: &str,
        now: Timestamp,
        feedback: &[FeedbackEntry],
    ) -> Result<ReflectionReport> {
        let config = self.config.clone();
        let embedder = self.embedder.clone();
        run_reflection_cycle(self.space_mut(space_id)?, now, &config, &embedder, feedback)
    }

    pub fn merge_nodes(
        &mut self,
        space_id: &str,
        threshold: Option<f64>,
    ) -> Result<Vec<MergeAction>> {
        let threshold = threshold.unwrap_or(self.config.pruning.node_merge_threshold);
        let embedder = self.embedder.clone();
        self.space_mut(space_id)?
            .merge_similar_nodes(threshold, &embedder)
    }

    pub fn purge_space(&mut self, space_id: &str) -> Result<Vec<UnitId>> {
        Ok(self.space_mut(space_id)?.purge_soft_deleted())
    }

    pub fn restore_unit(&mut self, space_id: &str, unit: UnitId, now: Timestamp) -> Result<()> {
        self.space_mut(space_id)?.restore(unit, now)
    }

    pub fn stats(&self, space_id: &str) -> Result<SpaceStats> {
        let space = self.space(space_id)?;
        let mut stats = SpaceStats {
            units_total: space.unit_count(),
            nodes: space.node_count(),
            generation: space.generation,
            store_tokens: space.store_tokens(),
            full_history_tokens: space.full_history_tokens(),
            ..SpaceStats::default()
        };
        for unit in space.units() {
            match unit.state {
                LifecycleState::Active => stats.units_active += 1,
                LifecycleState::PendingForget => stats.units_pending += 1,
                LifecycleState::SoftDeleted => stats.units_soft_deleted += 1,
                LifecycleState::Compressed => stats.units_compressed += 1,
            }
        }
        for edge in space.edges() {
            stats.edges += 1;
            if !edge.is_traversable() {
                stats.edges_failed += 1;
            }
        }
        Ok(stats)
    }

    // ------------------------------------------------------------------
    // Hub
    // ------------------------------------------------------------------

    /// Register an agent and make sure its space exists.
    pub fn register_agent(&mut self, profile: AgentProfile) -> Result<()> {
        let space_id = profile.space_id.clone();
        self.hub.register_agent(profile)?;
        self.ensure_space(&space_id);
        Ok(())
    }

    pub fn route(&self, tags: &BTreeSet<String>) -> Result<&AgentProfile> {
        self.hub.route(tags)
    }

    /// Build a share envelope from an agent's own space.
    pub fn share(
        &self,
        origin_agent: &str,
        topic_tags: &BTreeSet<String>,
        permissions: SharePermissions,
        now: Timestamp,
    ) -> Result<ShareEnvelope> {
        let profile = self
            .hub
            .agent(origin_agent)
            .ok_or_else(|| Error::PermissionDenied(origin_agent.to_string()))?;
        let space = self.space(&profile.space_id)?;
        summarize_for_share(
            space,
            origin_agent,
            topic_tags,
            permissions,
            now,
            self.config.hub.envelope_ttl_secs,
            &self.embedder,
        )
    }

    /// Apply an envelope to the target agent's space.
    pub fn apply_envelope(
        &mut self,
        envelope: &ShareEnvelope,
        target_agent: &str,
        now: Timestamp,
    ) -> Result<ApplyReport> {
        let profile = self
            .hub
            .agent(target_agent)
            .ok_or_else(|| Error::PermissionDenied(target_agent.to_string()))?
            .clone();
        let embedder = self.embedder.clone();
        let space = self.space_mut(&profile.space_id)?;
        apply_shared(space, envelope, &profile, now, &embedder)
    }
}

fn resolve_hits(space: &Space, hits: Vec<RetrievalHit>) -> Vec<QueryHit> {
    hits.into_iter()
        .map(|h| {
            let unit = space.unit(h.unit_id).expect("hit resolves");
            QueryHit {
                unit_id: h.unit_id,
                score: h.score,
                content: unit.content.clone(),
                fact: unit.fact.clone(),
                path: h.path,
            }
        })
        .collect()
}
