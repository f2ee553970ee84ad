//! The self-reflection engine: offline passes over the memory graph along
//! the temporal, factual, and logical dimensions, followed by pruning and a
//! forgetting sweep, with snapshot-and-swap atomicity.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::annotate::TemporalClass;
use crate::config::EngineConfig;
use crate::embedding::EmbeddingProvider;
use crate::error::Result;
use crate::forget::{sweep, ForgetReport};
use crate::graphstore::{EdgeValidity, Space};
use crate::prune::{prune_pass, PruneReport};
use crate::types::{EdgeId, LifecycleState, NodeId, Timestamp, UnitId};

/// Advisory findings produced by the temporal and logical passes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Finding {
    /// A unit's creation timestamp disagrees with its provenance order.
    OrderingInversion { earlier: UnitId, later: UnitId },
    /// A later event in a chain is classified Past of an earlier one.
    TimelineInversion { earlier: UnitId, later: UnitId },
    /// An intermediate node lost all but one usable edge.
    DanglingChain { node: NodeId },
    /// A cycle over functional relations.
    SuspectCycle { nodes: Vec<NodeId> },
}

/// A conflict resolution applied by the factual pass.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Resolution {
    /// The newer unit stays; the older compresses with a supersession
    /// pointer.
    Replacement { superseded: UnitId, by: UnitId },
    /// Conflicting values within the ambiguity window fuse into the newer
    /// unit, flagged unresolved.
    Fusion { absorbed: UnitId, into: UnitId },
}

/// Consolidated report of one reflection cycle.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ReflectionReport {
    pub temporal_findings: Vec<Finding>,
    pub factual_resolutions: Vec<Resolution>,
    pub logical_findings: Vec<Finding>,
    pub edges_reinforced: Vec<EdgeId>,
    pub prune: PruneReport,
    pub forget: ForgetReport,
    pub generation: u64,
}

impl ReflectionReport {
    /// True when the cycle changed nothing (findings may still be present;
    /// they are advisory).
    pub fn mutation_free(&self) -> bool {
        self.factual_resolutions.is_empty()
            && self.edges_reinforced.is_empty()
            && self.prune.is_noop()
            && self.forget.is_noop()
    }
}

/// User-feedback adjustment applied at cycle start: unit id → weight delta.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FeedbackEntry {
    pub unit_id: UnitId,
    pub delta: f64,
}

/// Temporal pass: advisory findings only, no mutation.
///
/// (a) Units whose creation order disagrees with the order of their source
/// utterances. (b) Entity chains where a later unit is framed Past while an
/// earlier one is Present or Future.
pub fn reflect_temporal(space: &Space) -> Vec<Finding> {
    let mut findings = Vec::new();

    // Provenance order: first utterance seq per unit.
    let mut first_seq: BTreeMap<UnitId, u64> = BTreeMap::new();
    for rec in space.utterances() {
        for id in &rec.unit_ids {
            first_seq.entry(*id).or_insert(rec.seq);
        }
    }
    let mut ordered: Vec<(u64, UnitId, Timestamp)> = space
        .units()
        .filter(|u| u.state.is_retrievable())
        .filter_map(|u| first_seq.get(&u.id).map(|seq| (*seq, u.id, u.created_at)))
        .collect();
    ordered.sort_unstable();
    for pair in ordered.windows(2) {
        let (_, earlier, t_earlier) = pair[0];
        let (_, later, t_later) = pair[1];
        if t_later < t_earlier {
            findings.push(Finding::OrderingInversion { earlier, later });
        }
    }

    // Timeline inversions along entity chains.
    let mut seen: BTreeSet<(UnitId, UnitId)> = BTreeSet::new();
    for node in space.nodes() {
        let mut chain: Vec<&crate::types::MemoryUnit> = node
            .unit_refs
            .iter()
            .filter_map(|id| space.unit(*id))
            .filter(|u| u.state.is_retrievable())
            .collect();
        chain.sort_by_key(|u| (u.created_at, u.id));
        for pair in chain.windows(2) {
            let (earlier, later) = (pair[0], pair[1]);
            if later.anchors.temporal_class == TemporalClass::Past
                && matches!(
                    earlier.anchors.temporal_class,
                    TemporalClass::Present | TemporalClass::Future
                )
                && seen.insert((earlier.id, later.id))
            {
                findings.push(Finding::TimelineInversion {
                    earlier: earlier.id,
                    later: later.id,
                });
            }
        }
    }
    findings
}

/// Factual pass: resolve functional-relation conflicts by replacement
/// (outside the ambiguity window) or fusion (inside it). Mutates the space.
pub fn reflect_factual(
    space: &mut Space,
    now: Timestamp,
    config: &EngineConfig,
    embedder: &dyn EmbeddingProvider,
) -> Result<Vec<Resolution>> {
    let mut resolutions = Vec::new();

    // Conflict groups keyed by (head node, functional label) over usable
    // edges, collecting (tail, source unit).
    let mut groups: BTreeMap<(NodeId, String), Vec<(NodeId, UnitId)>> = BTreeMap::new();
    for edge in space.edges() {
        if !edge.is_traversable() || !config.functional_relations.contains(&edge.relation_label) {
            continue;
        }
        for unit in &edge.source_units {
            let live = space
                .unit(*unit)
                .map(|u| u.state.is_retrievable())
                .unwrap_or(false);
            if live {
                groups
                    .entry((edge.head, edge.relation_label.clone()))
                    .or_default()
                    .push((edge.tail, *unit));
            }
        }
    }

    for ((_head, label), members) in groups {
        let tails: BTreeSet<NodeId> = members.iter().map(|(t, _)| *t).collect();
        if tails.len() < 2 {
            continue;
        }
        let winner = members
            .iter()
            .map(|(_, u)| *u)
            .max_by_key(|u| (space.unit(*u).expect("live").created_at, *u))
            .expect("group non-empty");
        let winner_created = space.unit(winner).expect("live").created_at;
        let winner_tail = members
            .iter()
            .find(|(_, u)| *u == winner)
            .map(|(t, _)| *t)
            .expect("winner is a member");

        let mut losers: Vec<UnitId> = members
            .iter()
            .filter(|(t, u)| *t != winner_tail && *u != winner)
            .map(|(_, u)| *u)
            .collect();
        losers.sort_unstable();
        losers.dedup();

        for loser in losers {
            let Some(loser_unit) = space.unit(loser) else {
                continue;
            };
            if !loser_unit.state.is_retrievable() {
                continue;
            }
            let gap = winner_created.since(loser_unit.created_at);
            if gap > config.reflection.ambiguity_window_secs {
                // Replacement.
                space.retire_unit(loser, LifecycleState::Compressed);
                let unit = space.unit_mut(loser).expect("exists");
                let key = unit
                    .fact
                    .as_ref()
                    .map(|f| f.key.clone())
                    .unwrap_or_else(|| label.clone());
                unit.content = format!("{key} superseded-by:{winner}");
                unit.superseded_by = Some(winner);
                resolutions.push(Resolution::Replacement {
                    superseded: loser,
                    by: winner,
                });
            } else {
                // Fusion: both values survive inside the newer unit,
                // flagged unresolved.
                let (loser_value, loser_provenance, loser_trace) = {
                    let u = space.unit(loser).expect("exists");
                    (
                        u.fact
                            .as_ref()
                            .map(|f| f.value.clone())
                            .unwrap_or_else(|| u.content.clone()),
                        u.provenance.clone(),
                        u.trace.clone(),
                    )
                };
                let new_content = {
                    let w = space.unit_mut(winner).expect("exists");
                    let key = w
                        .fact
                        .as_ref()
                        .map(|f| f.key.clone())
                        .unwrap_or_else(|| label.clone());
                    let winner_value = w
                        .fact
                        .as_ref()
                        .map(|f| f.value.clone())
                        .unwrap_or_else(|| w.content.clone());
                    w.preference_tags.insert("conflict-unresolved".to_string());
                    for p in loser_provenance {
                        if !w.provenance.contains(&p) {
                            w.provenance.push(p);
                        }
                    }
                    w.trace.merge(&loser_trace);
                    format!("{key} = {winner_value} | {loser_value} (conflict-unresolved)")
                };
                let new_embedding = embedder.embed(&new_content)?;
                space.update_unit_content(winner, new_content, new_embedding);
                space.retire_unit(loser, LifecycleState::SoftDeleted);
                space.unit_mut(loser).expect("exists").merged_into = Some(winner);
                resolutions.push(Resolution::Fusion {
                    absorbed: loser,
                    into: winner,
                });
            }
        }
    }

    // Edges of superseded units lose the latest-wins race.
    space.detect_failed_edges(now, &config.functional_relations);
    Ok(resolutions)
}

/// Logical pass: reinforce edges along retrieval paths observed since the
/// last reflection, flag broken closures, and flag functional cycles.
pub fn reflect_logical(space: &mut Space, config: &EngineConfig) -> (Vec<Finding>, Vec<EdgeId>) {
    let mut findings = Vec::new();

    // (a) Path reinforcement.
    let counts = space.take_traversal_counts();
    let mut reinforced = Vec::new();
    for (edge_id, count) in counts {
        if let Some(edge) = space.edge_mut(edge_id) {
            if !edge.is_traversable() {
                continue;
            }
            edge.strength = (edge.strength + config.reflection.reinforcement_delta * count as f64)
                .min(config.reflection.strength_cap);
            if edge.validity == EdgeValidity::Weakened
                && edge.strength >= config.forgetting.weaken_ceiling
            {
                edge.validity = EdgeValidity::Valid;
            }
            reinforced.push(edge_id);
        }
    }

    // (b) Dangling chains: nodes with several edges of which only one
    // remains usable.
    for node in space.nodes() {
        let total = space
            .edges()
            .filter(|e| e.head == node.id || e.tail == node.id)
            .count();
        let usable = space.incident_edges(node.id).count();
        if total >= 2 && usable == 1 {
            findings.push(Finding::DanglingChain { node: node.id });
        }
    }

    // (c) Cycles over functional relations (strongly connected components
    // of the functional subgraph).
    let functional_edges: Vec<(NodeId, NodeId)> = space
        .edges()
        .filter(|e| e.is_traversable() && config.functional_relations.contains(&e.relation_label))
        .map(|e| (e.head, e.tail))
        .collect();
    for cycle in strongly_connected_cycles(&functional_edges) {
        findings.push(Finding::SuspectCycle { nodes: cycle });
    }

    (findings, reinforced)
}

/// Tarjan strongly-connected components; returns components that contain a
/// cycle (size > 1, or a self-loop), each sorted ascending.
fn strongly_connected_cycles(edges: &[(NodeId, NodeId)]) -> Vec<Vec<NodeId>> {
    let mut adj: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    let mut nodes: BTreeSet<NodeId> = BTreeSet::new();
    let mut self_loops: BTreeSet<NodeId> = BTreeSet::new();
    for (h, t) in edges {
        nodes.insert(*h);
        nodes.insert(*t);
        if h == t {
            self_loops.insert(*h);
        } else {
            adj.entry(*h).or_default().push(*t);
        }
    }

    #[derive(Default)]
    struct State {
        index: BTreeMap<NodeId, usize>,
        low: BTreeMap<NodeId, usize>,
        on_stack: BTreeSet<NodeId>,
        stack: Vec<NodeId>,
        next: usize,
        components: Vec<Vec<NodeId>>,
    }
    fn strongconnect(v: NodeId, adj: &BTreeMap<NodeId, Vec<NodeId>>, st: &mut State) {
        st.index.insert(v, st.next);
        st.low.insert(v, st.next);
        st.next += 1;
        st.stack.push(v);
        st.on_stack.insert(v);
        for &w in adj.get(&v).into_iter().flatten() {
            if !st.index.contains_key(&w) {
                strongconnect(w, adj, st);
                let lw = st.low[&w];
                let lv = st.low[&v];
                st.low.insert(v, lv.min(lw));
            } else if st.on_stack.contains(&w) {
                let iw = st.index[&w];
                let lv = st.low[&v];
                st.low.insert(v, lv.min(iw));
            }
        }
        if st.low[&v] == st.index[&v] {
            let mut component = Vec::new();
            while let Some(w) = st.stack.pop() {
                st.on_stack.remove(&w);
                component.push(w);
                if w == v {
                    break;
                }
            }
            st.components.push(component);
        }
    }

    let mut st = State::default();
    for &v in &nodes {
        if !st.index.contains_key(&v) {
            strongconnect(v, &adj, &mut st);
        }
    }
    let mut cycles: Vec<Vec<NodeId>> = Vec::new();
    for mut component in st.components {
        component.sort_unstable();
        if component.len() > 1 || self_loops.contains(&component[0]) {
            cycles.push(component);
        }
    }
    cycles.sort();
    cycles
}

/// One full reflection cycle: temporal → factual → logical → prune →
/// forget, with pass-level atomicity (the space is cloned, passes run on
/// the clone, and the result swaps in only on success).
pub fn run_reflection_cycle(
    space: &mut Space,
    now: Timestamp,
    config: &EngineConfig,
    embedder: &dyn EmbeddingProvider,
    feedback: &[FeedbackEntry],
) -> Result<ReflectionReport> {
    let mut working = space.clone();

    for entry in feedback {
        if let Some(unit) = working.unit_mut(entry.unit_id) {
            unit.emotion_weight = (unit.emotion_weight + entry.delta).clamp(0.0, 1.0);
        }
    }

    let temporal_findings = reflect_temporal(&working);
    let factual_resolutions = reflect_factual(&mut working, now, config, embedder)?;
    let (logical_findings, edges_reinforced) = reflect_logical(&mut working, config);
    let prune = prune_pass(&mut working, now, config)?;
    let forget = sweep(&mut working, now, &config.activation, &config.forgetting)?;

    working.generation += 1;
    let generation = working.generation;
    *space = working;

    Ok(ReflectionReport {
        temporal_findings,
        factual_resolutions,
        logical_findings,
        edges_reinforced,
        prune,
        forget,
        generation,
    })
}
