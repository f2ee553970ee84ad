//! Intelligent semantic pruning: association mapping, redundancy
//! classification (duplicate / irrelevant / outdated), and refinement with
//! semantic fusion.
//!
//! Stage 1 builds a link structure over units: shared strong-entity links
//! plus question→answer dialogue-chain links. Stage 2 classifies every
//! retrievable unit. Stage 3 applies the verdicts: duplicates fuse into the
//! earliest member (keeping the longest phrasing), irrelevant chit-chat is
//! soft-deleted, and outdated units compress to a one-line summary with a
//! supersession pointer. Distinct fact keys are never lost.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::annotate::UtteranceRole;
use crate::config::EngineConfig;
use crate::embedding::cosine;
use crate::error::{Error, Result};
use crate::graphstore::{EdgeValidity, Space};
use crate::types::{LifecycleState, MemoryUnit, Timestamp, UnitId};

/// Verdict classes, in precedence order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RedundancyClass {
    Duplicate,
    Outdated,
    Irrelevant,
    Keep,
}

/// Why a verdict was reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Evidence {
    /// Cosine similarity to the merge target.
    Similarity {
        value: f64,
    },
    /// Chit-chat: link count to task units and the activation standing.
    Association {
        task_links: usize,
        retention: f64,
        median_retention: f64,
        role: UtteranceRole,
    },
    /// Superseded by a newer unit.
    Superseded {
        by: UnitId,
    },
    Keep,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RedundancyVerdict {
    pub unit_id: UnitId,
    pub class: RedundancyClass,
    pub merge_target: Option<UnitId>,
    pub evidence: Evidence,
}

/// Classification output, pinned to the store version it was computed
/// against.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RedundancyReport {
    pub store_version: u64,
    pub verdicts: Vec<RedundancyVerdict>,
}

/// Outcome of one refine pass.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PruneReport {
    pub units_removed: usize,
    pub units_merged: usize,
    pub units_compressed: usize,
    pub tokens_before: usize,
    pub tokens_after: usize,
}

impl PruneReport {
    pub fn is_noop(&self) -> bool {
        self.units_removed == 0 && self.units_merged == 0 && self.units_compressed == 0
    }
}

/// Unit-to-unit links discovered by association mapping.
#[derive(Debug, Clone, Default)]
pub struct AssociationMap {
    /// Units sharing a strong-entity node.
    pub entity_links: BTreeSet<(UnitId, UnitId)>,
    /// Question→answer adjacency from the dialogue log.
    pub chain_links: BTreeSet<(UnitId, UnitId)>,
}

impl AssociationMap {
    fn ordered(a: UnitId, b: UnitId) -> (UnitId, UnitId) {
        if a < b {
            (a, b)
        } else {
            (b, a)
        }
    }

    pub fn entity_linked(&self, a: UnitId, b: UnitId) -> bool {
        self.entity_links.contains(&Self::ordered(a, b))
    }

    pub fn linked(&self, a: UnitId, b: UnitId) -> bool {
        let key = Self::ordered(a, b);
        self.entity_links.contains(&key) || self.chain_links.contains(&key)
    }

    pub fn entity_neighbors(&self, id: UnitId) -> impl Iterator<Item = UnitId> + '_ {
        self.entity_links.iter().filter_map(move |(a, b)| {
            if *a == id {
                Some(*b)
            } else if *b == id {
                Some(*a)
            } else {
                None
            }
        })
    }
}

/// Stage 1: link units sharing a strong-entity node, and link each
/// question's units to the answering utterance's units (adjacent turn,
/// different speaker, non-question reply).
pub fn build_association_map(space: &Space) -> AssociationMap {
    let mut map = AssociationMap::default();
    for node in space.nodes() {
        let live: Vec<UnitId> = node
            .unit_refs
            .iter()
            .copied()
            .filter(|id| {
                space
                    .unit(*id)
                    .map(|u| u.state.is_retrievable())
                    .unwrap_or(false)
            })
            .collect();
        for i in 0..live.len() {
            for j in (i + 1)..live.len() {
                map.entity_links.insert((live[i], live[j]));
            }
        }
    }
    let utterances = space.utterances();
    for pair in utterances.windows(2) {
        let (q, a) = (&pair[0], &pair[1]);
        if q.role == UtteranceRole::Question
            && a.role == UtteranceRole::Statement
            && q.speaker != a.speaker
        {
            for qu in &q.unit_ids {
                for au in &a.unit_ids {
                    if qu != au {
                        map.chain_links.insert(AssociationMap::ordered(*qu, *au));
                    }
                }
            }
        }
    }
    map
}

/// Dialogue role each unit was born with (first utterance that produced
/// it). Units without an utterance record default to Statement.
fn unit_roles(space: &Space) -> BTreeMap<UnitId, UtteranceRole> {
    let mut roles = BTreeMap::new();
    for rec in space.utterances() {
        for id in &rec.unit_ids {
            roles.entry(*id).or_insert(rec.role);
        }
    }
    roles
}

/// Stage 2: classify every retrievable unit. Precedence: Duplicate >
/// Outdated > Irrelevant > Keep.
pub fn classify_redundancy(
    space: &Space,
    now: Timestamp,
    config: &EngineConfig,
) -> Result<RedundancyReport> {
    let map = build_association_map(space);
    let roles = unit_roles(space);
    let params = &config.activation;
    let units: Vec<&MemoryUnit> = space.retrievable_units().collect();

    // --- duplicates: cosine >= threshold within fact-compatible groups ----
    // Compatible means same (key, value) for fact units, or both fact-less.
    // Merging across distinct facts would lose fact keys, which refinement
    // must never do.
    let mut groups: BTreeMap<(String, String), Vec<&MemoryUnit>> = BTreeMap::new();
    for unit in &units {
        let key = unit
            .fact
            .as_ref()
            .map(|f| (f.key.clone(), f.value.clone()))
            .unwrap_or_default();
        groups.entry(key).or_default().push(unit);
    }
    let mut dup_root: BTreeMap<UnitId, UnitId> = BTreeMap::new();
    fn find(root: &mut BTreeMap<UnitId, UnitId>, id: UnitId) -> UnitId {
        let mut cur = id;
        while let Some(&p) = root.get(&cur) {
            if p == cur {
                break;
            }
            cur = p;
        }
        cur
    }
    let mut dup_similarity: BTreeMap<UnitId, f64> = BTreeMap::new();
    for members in groups.values() {
        for i in 0..members.len() {
            for j in (i + 1)..members.len() {
                let sim = cosine(&members[i].embedding, &members[j].embedding)?;
                if sim >= config.pruning.dup_threshold {
                    let (a, b) = (members[i].id, members[j].id);
                    let (ra, rb) = (find(&mut dup_root, a), find(&mut dup_root, b));
                    if ra != rb {
                        let (low, high) = if ra < rb { (ra, rb) } else { (rb, ra) };
                        dup_root.insert(high, low);
                        dup_root.insert(low, low);
                    }
                    dup_similarity
                        .entry(b.max(a))
                        .and_modify(|s| *s = s.max(sim))
                        .or_insert(sim);
                }
            }
        }
    }
    let mut duplicate_of: BTreeMap<UnitId, UnitId> = BTreeMap::new();
    for unit in &units {
        let root = find(&mut dup_root, unit.id);
        if root != unit.id {
            duplicate_of.insert(unit.id, root);
        }
    }

    // --- outdated: losers of functional latest-wins races, or stale values
    // of a fact key contradicted by a newer unit -------------------------
    let mut superseded_by: BTreeMap<UnitId, UnitId> = BTreeMap::new();
    // (a) via failed functional edges: the surviving newest edge names the
    // superseding unit.
    for edge in space.edges() {
        if edge.validity != EdgeValidity::Failed
            || !config.functional_relations.contains(&edge.relation_label)
        {
            continue;
        }
        let winner = space
            .edges()
            .filter(|e| {
                e.is_traversable() && e.head == edge.head && e.relation_label == edge.relation_label
            })
            .max_by_key(|e| (e.timestamp, e.id))
            .and_then(|e| e.source_units.iter().max().copied());
        let Some(winner) = winner else { continue };
        for loser in &edge.source_units {
            let live = space
                .unit(*loser)
                .map(|u| u.state.is_retrievable())
                .unwrap_or(false);
            if live && *loser != winner {
                superseded_by.insert(*loser, winner);
            }
        }
    }
    // (b) via fact keys: a newer unit asserts a different value and the old
    // unit's retention has fallen below the outdated threshold.
    let outdated_threshold = config.outdated_threshold();
    let mut by_key: BTreeMap<&str, Vec<&MemoryUnit>> = BTreeMap::new();
    for unit in &units {
        if let Some(fact) = &unit.fact {
            by_key.entry(fact.key.as_str()).or_default().push(unit);
        }
    }
    for members in by_key.values() {
        let newest = members
            .iter()
            .max_by_key(|u| (u.created_at, u.id))
            .expect("group non-empty");
        for unit in members {
            if unit.id == newest.id
                || unit.fact.as_ref().map(|f| &f.value) == newest.fact.as_ref().map(|f| &f.value)
            {
                continue;
            }
            if unit.trace.retention(now, params) < outdated_threshold {
                superseded_by.entry(unit.id).or_insert(newest.id);
            }
        }
    }

    // --- irrelevant: fact-less chit-chat --------------------------------
    let mut retentions: Vec<f64> = units
        .iter()
        .map(|u| u.trace.retention(now, params))
        .collect();
    retentions.sort_by(|a, b| a.partial_cmp(b).expect("retention is finite"));
    let median_retention = retentions
        .get((retentions.len().saturating_sub(1)) / 2)
        .copied()
        .unwrap_or(0.0);
    let task_units: BTreeSet<UnitId> = units
        .iter()
        .filter(|u| u.fact.is_some())
        .map(|u| u.id)
        .collect();

    let mut verdicts = Vec::with_capacity(units.len());
    for unit in &units {
        if let Some(target) = duplicate_of.get(&unit.id) {
            verdicts.push(RedundancyVerdict {
                unit_id: unit.id,
                class: RedundancyClass::Duplicate,
                merge_target: Some(*target),
                evidence: Evidence::Similarity {
                    value: dup_similarity.get(&unit.id).copied().unwrap_or(1.0),
                },
            });
            continue;
        }
        if let Some(by) = superseded_by.get(&unit.id) {
            verdicts.push(RedundancyVerdict {
                unit_id: unit.id,
                class: RedundancyClass::Outdated,
                merge_target: Some(*by),
                evidence: Evidence::Superseded { by: *by },
            });
            continue;
        }
        if unit.fact.is_none() && unit.preference_tags.is_empty() {
            let task_links = map
                .entity_neighbors(unit.id)
                .filter(|n| task_units.contains(n))
                .count();
            let retention = unit.trace.retention(now, params);
            let role = roles
                .get(&unit.id)
                .copied()
                .unwrap_or(UtteranceRole::Statement);
            // Question/acknowledgment units are chit-chat outright; other
            // fact-less units must also sit at or below the median
            // activation.
            let chit_chat = role != UtteranceRole::Statement || retention <= median_retention;
            if task_links == 0 && chit_chat {
                verdicts.push(RedundancyVerdict {
                    unit_id: unit.id,
                    class: RedundancyClass::Irrelevant,
                    merge_target: None,
                    evidence: Evidence::Association {
                        task_links,
                        retention,
                        median_retention,
                        role,
                    },
                });
                continue;
            }
        }
        verdicts.push(RedundancyVerdict {
            unit_id: unit.id,
            class: RedundancyClass::Keep,
            merge_target: None,
            evidence: Evidence::Keep,
        });
    }
    Ok(RedundancyReport {
        store_version: space.version,
        verdicts,
    })
}

/// Stage 3: apply verdicts. Fails with `StaleVerdicts` when the store moved
/// since classification.
pub fn refine(report: &RedundancyReport, space: &mut Space) -> Result<PruneReport> {
    if report.store_version != space.version {
        return Err(Error::StaleVerdicts {
            expected: report.store_version,
            actual: space.version,
        });
    }
    let tokens_before = space.store_tokens();
    let mut out = PruneReport {
        tokens_before,
        ..PruneReport::default()
    };

    // Duplicates: fold members into their targets.
    let mut merges: BTreeMap<UnitId, Vec<UnitId>> = BTreeMap::new();
    for v in &report.verdicts {
        if v.class == RedundancyClass::Duplicate {
            merges
                .entry(v.merge_target.expect("duplicate verdicts carry a target"))
                .or_default()
                .push(v.unit_id);
        }
    }
    for (target, members) in merges {
        // Longest phrasing wins; ties prefer the earliest unit.
        let mut best: (usize, UnitId) = {
            let t = space.unit(target).expect("target exists");
            (t.content.chars().count(), target)
        };
        for m in &members {
            let u = space.unit(*m).expect("member exists");
            let len = u.content.chars().count();
            if len > best.0 || (len == best.0 && *m < best.1) {
                best = (len, *m);
            }
        }
        let (content, embedding) = {
            let u = space.unit(best.1).expect("best exists");
            (u.content.clone(), u.embedding.clone())
        };
        for m in members {
            let (provenance, trace, tags, emotion) = {
                let u = space.unit(m).expect("member exists");
                (
                    u.provenance.clone(),
                    u.trace.clone(),
                    u.preference_tags.clone(),
                    u.emotion_weight,
                )
            };
            {
                let t = space.unit_mut(target).expect("target exists");
                for p in provenance {
                    if !t.provenance.contains(&p) {
                        t.provenance.push(p);
                    }
                }
                t.trace.merge(&trace);
                t.preference_tags.extend(tags);
                t.emotion_weight = t.emotion_weight.max(emotion);
            }
            space.retire_unit(m, LifecycleState::SoftDeleted);
            space.unit_mut(m).expect("member exists").merged_into = Some(target);
            out.units_merged += 1;
        }
        space.update_unit_content(target, content, embedding);
    }

    // Outdated: compress to a one-line summary with a supersession pointer.
    for v in &report.verdicts {
        if v.class != RedundancyClass::Outdated {
            continue;
        }
        let by = v
            .merge_target
            .expect("outdated verdicts carry the superseder");
        if space
            .unit(v.unit_id)
            .map(|u| !u.state.is_retrievable())
            .unwrap_or(true)
        {
            continue;
        }
        space.retire_unit(v.unit_id, LifecycleState::Compressed);
        let unit = space.unit_mut(v.unit_id).expect("unit exists");
        let key = unit
            .fact
            .as_ref()
            .map(|f| f.key.clone())
            .unwrap_or_else(|| "entry".to_string());
        unit.content = format!("{key} superseded-by:{by}");
        unit.superseded_by = Some(by);
        out.units_compressed += 1;
    }

    // Irrelevant: soft-delete.
    for v in &report.verdicts {
        if v.class != RedundancyClass::Irrelevant {
            continue;
        }
        if space
            .unit(v.unit_id)
            .map(|u| u.state.is_retrievable())
            .unwrap_or(false)
        {
            space.retire_unit(v.unit_id, LifecycleState::SoftDeleted);
            out.units_removed += 1;
        }
    }

    out.tokens_after = space.store_tokens();
    debug_assert!(out.tokens_after <= tokens_before);
    Ok(out)
}

/// Classify-then-refine in one exclusive pass, after failing edges that
/// lost functional latest-wins races (so edge-level supersession is visible
/// to classification).
pub fn prune_pass(space: &mut Space, now: Timestamp, config: &EngineConfig) -> Result<PruneReport> {
    space.detect_failed_edges(now, &config.functional_relations);
    let report = classify_redundancy(space, now, config)?;
    refine(&report, space)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotate::{generate_units, verbatim_unit, Annotator, UtteranceRole};
    use crate::embedding::HashEmbedder;
    use crate::graphstore::UtteranceRecord;

    struct Fixture {
        space: Space,
        annotator: Annotator,
        embedder: HashEmbedder,
    }

    impl Fixture {
        fn new() -> Self {
            Fixture {
                space: Space::new("s", 256),
                annotator: Annotator::default(),
                embedder: HashEmbedder::default(),
            }
        }

        fn ingest(&mut self, text: &str, speaker: &str, ts: u64) -> Vec<UnitId> {
            let seq = self.space.next_utterance_seq();
            let ref_id = format!("utt:s:{seq}");
            let context: Vec<String> = self
                .space
                .utterances()
                .iter()
                .rev()
                .take(4)
                .map(|u| u.text.clone())
                .collect::<Vec<_>>()
                .into_iter()
                .rev()
                .collect();
            let anchors = self.annotator.annotate(text, &context).unwrap();
            let role = self.annotator.role(text);
            let tags = self.annotator.preference_tags(text);
            let mut units = generate_units(
                &anchors,
                text,
                &ref_id,
                Timestamp(ts),
                "s",
                &tags,
                &self.embedder,
            )
            .unwrap();
            if units.is_empty() {
                units.push(
                    verbatim_unit(
                        &anchors,
                        text,
                        &ref_id,
                        Timestamp(ts),
                        "s",
                        &tags,
                        &self.embedder,
                    )
                    .unwrap(),
                );
            }
            let ids: Vec<UnitId> = units
                .into_iter()
                .map(|u| self.space.upsert_unit(u).unwrap())
                .collect();
            self.space.record_utterance(UtteranceRecord {
                seq,
                ref_id,
                speaker: speaker.to_string(),
                ts: Timestamp(ts),
                role,
                text: text.to_string(),
                unit_ids: ids.clone(),
            });
            ids
        }
    }

    #[test]
    fn shared_entity_units_are_linked() {
        let mut fx = Fixture::new();
        let a = fx.ingest("The warranty is 1-year free.", "agent", 10)[0];
        let b = fx.ingest("The warranty covers Paris stores.", "agent", 20);
        let map = build_association_map(&fx.space);
        // Both mention "warranty" (gazetteer strong entity).
        assert!(map.entity_linked(a, b[0]));
    }

    #[test]
    fn disjoint_units_are_unlinked() {
        let mut fx = Fixture::new();
        let a = fx.ingest("Milo lives in Paris.", "user", 10)[0];
        let b = fx.ingest("Rena works at Zephyr.", "user", 20)[0];
        let map = build_association_map(&fx.space);
        assert!(!map.linked(a, b));
    }

    #[test]
    fn warranty_chain_and_entity_links() {
        // Three QA rounds with distinct phrasings; chain links Q_i–A_i plus
        // entity links among the three warranty answers.
        let mut fx = Fixture::new();
        let q1 = fx.ingest(
            "What is the after-sales service time for this item?",
            "user",
            1,
        )[0];
        let a1 = fx.ingest("The warranty is 1-year free.", "agent", 2)[0];
        fx.ingest("Okay, I understand.", "user", 3);
        let q2 = fx.ingest("How long is the coverage again?", "user", 4)[0];
        let a2 = fx.ingest("The warranty is 1-year, free of charge.", "agent", 5)[0];
        fx.ingest("Got it, thanks!", "user", 6);
        let q3 = fx.ingest("When does the coverage end?", "user", 7)[0];
        let a3 = fx.ingest("The warranty is one year, free.", "agent", 8)[0];
        fx.ingest("Alright, noted.", "user", 9);

        let map = build_association_map(&fx.space);
        assert!(map.chain_links.contains(&AssociationMap::ordered(q1, a1)));
        assert!(map.chain_links.contains(&AssociationMap::ordered(q2, a2)));
        assert!(map.chain_links.contains(&AssociationMap::ordered(q3, a3)));
        assert!(map.entity_linked(a1, a2));
        assert!(map.entity_linked(a1, a3));
        assert!(map.entity_linked(a2, a3));
    }

    #[test]
    fn acknowledgments_classify_irrelevant() {
        let mut fx = Fixture::new();
        fx.ingest("Milo lives in Paris.", "user", 10);
        let ack = fx.ingest("Okay, I understand.", "user", 20)[0];
        let report =
            classify_redundancy(&fx.space, Timestamp(30), &EngineConfig::default()).unwrap();
        let verdict = report
            .verdicts
            .iter()
            .find(|v| v.unit_id == ack)
            .expect("ack unit classified");
        assert_eq!(verdict.class, RedundancyClass::Irrelevant);
        match &verdict.evidence {
            Evidence::Association {
                role, task_links, ..
            } => {
                assert_eq!(*role, UtteranceRole::Acknowledgment);
                assert_eq!(*task_links, 0);
            }
            other => panic!("unexpected evidence {other:?}"),
        }
    }

    #[test]
    fn near_duplicates_target_the_earliest() {
        let mut fx = Fixture::new();
        let first = fx.ingest("Milo lives in Paris.", "user", 10)[0];
        let second = fx.ingest("Milo lives in Paris!", "user", 20)[0];
        let third = fx.ingest("Milo lives in Paris", "user", 30)[0];
        assert_ne!(first, second);
        let report =
            classify_redundancy(&fx.space, Timestamp(40), &EngineConfig::default()).unwrap();
        let dups: Vec<_> = report
            .verdicts
            .iter()
            .filter(|v| v.class == RedundancyClass::Duplicate)
            .collect();
        assert_eq!(dups.len(), 2);
        for d in dups {
            assert_eq!(d.merge_target, Some(first));
            assert!([second, third].contains(&d.unit_id));
        }
    }

    #[test]
    fn superseded_unit_is_outdated() {
        let mut fx = Fixture::new();
        let old = fx.ingest("Milo lives in Paris.", "user", 1_000)[0];
        fx.ingest("Milo lives in Berlin.", "user", 2_000_000);
        let config = EngineConfig::default();
        fx.space
            .detect_failed_edges(Timestamp(3_000_000), &config.functional_relations);
        let report = classify_redundancy(&fx.space, Timestamp(3_000_000), &config).unwrap();
        let verdict = report.verdicts.iter().find(|v| v.unit_id == old).unwrap();
        assert_eq!(verdict.class, RedundancyClass::Outdated);
    }

    #[test]
    fn refine_rejects_stale_verdicts() {
        let mut fx = Fixture::new();
        fx.ingest("Milo lives in Paris.", "user", 10);
        let report =
            classify_redundancy(&fx.space, Timestamp(30), &EngineConfig::default()).unwrap();
        fx.ingest("Rena works at Zephyr.", "user", 20);
        assert!(matches!(
            refine(&report, &mut fx.space),
            Err(Error::StaleVerdicts { .. })
        ));
    }

    #[test]
    fn all_keep_verdicts_leave_store_unchanged() {
        let mut fx = Fixture::new();
        fx.ingest("Milo lives in Paris.", "user", 10);
        fx.ingest("Rena works at Zephyr.", "user", 20);
        let report =
            classify_redundancy(&fx.space, Timestamp(30), &EngineConfig::default()).unwrap();
        assert!(report
            .verdicts
            .iter()
            .all(|v| v.class == RedundancyClass::Keep));
        let out = refine(&report, &mut fx.space).unwrap();
        assert!(out.is_noop());
        assert_eq!(out.tokens_before, out.tokens_after);
    }

    #[test]
    fn duplicate_merge_unions_provenance_and_keeps_longest() {
        let mut fx = Fixture::new();
        let first = fx.ingest("Milo lives in Paris", "user", 10)[0];
        fx.ingest("Milo lives in Paris.", "user", 20);
        let config = EngineConfig::default();
        let report = classify_redundancy(&fx.space, Timestamp(40), &config).unwrap();
        let out = refine(&report, &mut fx.space).unwrap();
        assert_eq!(out.units_merged, 1);
        let target = fx.space.unit(first).unwrap();
        assert_eq!(target.content, "milo lives in paris.");
        assert_eq!(target.provenance.len(), 2);
        assert!(out.tokens_after <= out.tokens_before);
    }

    #[test]
    fn prune_pass_is_idempotent() {
        let mut fx = Fixture::new();
        for (i, text) in [
            "Milo lives in Paris.",
            "Milo lives in Paris!",
            "Milo lives in Paris",
            "Okay, I understand.",
            "Rena works at Zephyr.",
        ]
        .iter()
        .enumerate()
        {
            fx.ingest(text, "user", 10 + i as u64);
        }
        let config = EngineConfig::default();
        let first = prune_pass(&mut fx.space, Timestamp(100), &config).unwrap();
        assert!(!first.is_noop());
        let second = prune_pass(&mut fx.space, Timestamp(101), &config).unwrap();
        assert!(second.is_noop(), "{second:?}");
        assert_eq!(second.tokens_before, second.tokens_after);
    }
}
