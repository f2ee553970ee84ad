//! The memory scheduling side: hybrid scoring, spreading activation over the
//! graph, top-k retrieval, and multi-hop path extraction.
//!
//! A unit's score is a convex combination of four bounded signals —
//! semantic similarity, logistic-squashed base-level activation, preference
//! overlap (Jaccard), and emotional weight — plus a spreading-activation
//! boost scaled by the activation weight:
//!
//! ```text
//! score = w_sim * max(0, cos) + w_act * (sigma(B) + boost)
//!       + w_pref * jaccard(prefs, tags) + w_emo * emotion
//! ```
//!
//! Boost propagates from query-matched seed nodes along usable edges,
//! multiplying by `hop_decay * strength/max_sibling_strength` per hop and
//! keeping the maximum over paths, so uniformly rescaling all edge strengths
//! never changes a ranking.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::activation::{logistic, ActivationParams};
use crate::embedding::{cosine, normalize_text, EmbeddingProvider};
use crate::error::{Error, Result};
use crate::graphstore::Space;
use crate::types::{EdgeId, MemoryUnit, NodeId, Timestamp, UnitId};

/// Weights of the hybrid score. The four weights are non-negative and sum
/// to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoreWeights {
    pub w_sim: f64,
    pub w_act: f64,
    pub w_pref: f64,
    pub w_emo: f64,
    pub hop_decay: f64,
    pub max_hops: usize,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        ScoreWeights {
            w_sim: 0.55,
            w_act: 0.25,
            w_pref: 0.10,
            w_emo: 0.10,
            hop_decay: 0.5,
            max_hops: 2,
        }
    }
}

impl ScoreWeights {
    pub fn validate(&self) -> Result<()> {
        let weights = [self.w_sim, self.w_act, self.w_pref, self.w_emo];
        if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(Error::ConfigInvalid(
                "score weights must be non-negative".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::ConfigInvalid(format!(
                "score weights must sum to 1, got {sum}"
            )));
        }
        if !(0.0 < self.hop_decay && self.hop_decay < 1.0) {
            return Err(Error::ConfigInvalid(format!(
                "hop_decay must be in (0, 1), got {}",
                self.hop_decay
            )));
        }
        Ok(())
    }
}

/// One retrieval result: the unit, its score, and the spreading-activation
/// path that contributed (empty for direct hits).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetrievalHit {
    pub unit_id: UnitId,
    pub score: f64,
    pub path: Vec<EdgeId>,
}

/// Spreading-activation result for one node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeBoost {
    pub boost: f64,
    /// Edges from the seed to this node along the best path.
    pub path: Vec<EdgeId>,
}

/// Jaccard overlap of two tag sets; 0 when either is empty.
pub fn tag_overlap(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let inter = a.intersection(b).count() as f64;
    let union = a.union(b).count() as f64;
    inter / union
}

/// Hybrid score of one unit against a query vector, without any
/// spreading-activation boost.
pub fn score_unit(
    query_vec: &[f32],
    unit: &MemoryUnit,
    now: Timestamp,
    weights: &ScoreWeights,
    prefs: &BTreeSet<String>,
    params: &ActivationParams,
) -> Result<f64> {
    let sim = cosine(query_vec, &unit.embedding)?.max(0.0);
    let activation = logistic(unit.trace.base_level_activation(now, params.d));
    let pref = tag_overlap(prefs, &unit.preference_tags);
    Ok(weights.w_sim * sim
        + weights.w_act * activation
        + weights.w_pref * pref
        + weights.w_emo * unit.emotion_weight)
}

/// Seed nodes for a query: nodes whose label (or any alias) appears as a
/// token sequence in the query. Tokens are cleaned the way the annotator
/// cleans them (possessive 's stripped, edge punctuation trimmed), so
/// "Sana's favorite drink" seeds the "sana" node.
pub fn seed_nodes(space: &Space, query: &str) -> BTreeSet<NodeId> {
    let haystack = query_haystack(query);
    let mut seeds = BTreeSet::new();
    // Only nodes whose first label token occurs in the query can match;
    // the token index narrows the scan to those.
    for token in haystack.split_whitespace() {
        for node in space.nodes_with_first_token(token) {
            if seeds.contains(&node.id) {
                continue;
            }
            let matched = std::iter::once(node.label.as_str())
                .chain(node.aliases.iter().map(|a| a.as_str()))
                .any(|label| contains_phrase(&haystack, label));
            if matched {
                seeds.insert(node.id);
            }
        }
    }
    seeds
}

/// Space-delimited, cleaned token string for phrase matching.
pub fn query_haystack(query: &str) -> String {
    let mut haystack = String::with_capacity(query.len() + 2);
    haystack.push(' ');
    for token in normalize_text(query).split_whitespace() {
        let token = token.trim_matches(|c: char| !c.is_alphanumeric() && c != '-');
        let token = token.strip_suffix("'s").unwrap_or(token);
        if token.is_empty() {
            continue;
        }
        haystack.push_str(token);
        haystack.push(' ');
    }
    haystack
}

/// Whole-word phrase containment in a space-delimited haystack, without
/// allocating.
pub fn contains_phrase(haystack: &str, phrase: &str) -> bool {
    if phrase.is_empty() || phrase.len() + 2 > haystack.len() {
        return false;
    }
    let bytes = haystack.as_bytes();
    let mut from = 0;
    while let Some(pos) = haystack[from..].find(phrase) {
        let start = from + pos;
        let end = start + phrase.len();
        let boundary_left = start == 0 || bytes[start - 1] == b' ';
        let boundary_right = end == bytes.len() || bytes[end] == b' ';
        if boundary_left && boundary_right {
            return true;
        }
        from = start + 1;
    }
    false
}

/// Spreading activation from `seeds` over usable (non-failed) edges, in both
/// directions. Seeds get boost 1; each hop multiplies by
/// `hop_decay * strength / max_incident_strength(from)`; a node keeps the
/// maximum boost over all paths of length <= `max_hops`.
pub fn spread(
    space: &Space,
    seeds: &BTreeSet<NodeId>,
    weights: &ScoreWeights,
) -> Result<BTreeMap<NodeId, NodeBoost>> {
    for seed in seeds {
        if space.node(*seed).is_none() {
            return Err(Error::UnknownNode(seed.to_string()));
        }
    }
    let mut best: BTreeMap<NodeId, NodeBoost> = seeds
        .iter()
        .map(|&id| {
            (
                id,
                NodeBoost {
                    boost: 1.0,
                    path: Vec::new(),
                },
            )
        })
        .collect();

    let mut frontier: Vec<NodeId> = seeds.iter().copied().collect();
    for _hop in 0..weights.max_hops {
        let mut improved: Vec<NodeId> = Vec::new();
        for &from in &frontier {
            let from_boost = best[&from].clone();
            let max_strength = space
                .incident_edges(from)
                .map(|e| e.strength)
                .fold(0.0f64, f64::max);
            if max_strength <= 0.0 {
                continue;
            }
            for edge in space.incident_edges(from) {
                let other = if edge.head == from {
                    edge.tail
                } else {
                    edge.head
                };
                if other == from {
                    continue;
                }
                let cand = from_boost.boost * weights.hop_decay * (edge.strength / max_strength);
                let entry = best.get(&other);
                if entry.map(|b| cand > b.boost).unwrap_or(true) {
                    let mut path = from_boost.path.clone();
                    path.push(edge.id);
                    best.insert(other, NodeBoost { boost: cand, path });
                    if !improved.contains(&other) {
                        improved.push(other);
                    }
                }
            }
        }
        if improved.is_empty() {
            break;
        }
        improved.sort_unstable();
        frontier = improved;
    }
    Ok(best)
}

/// A scored candidate before ranking.
#[derive(Debug, Clone)]
struct Candidate {
    unit_id: UnitId,
    score: f64,
    last_access: Timestamp,
    path: Vec<EdgeId>,
}

/// Score every retrievable unit against `query`. Pure: no access recording.
pub fn score_all(
    space: &Space,
    query: &str,
    now: Timestamp,
    weights: &ScoreWeights,
    prefs: &BTreeSet<String>,
    params: &ActivationParams,
    embedder: &dyn EmbeddingProvider,
) -> Result<Vec<RetrievalHit>> {
    let query_vec = embedder.embed(query)?;
    let query_norm = crate::embedding::squared_norm(&query_vec);
    let seeds = seed_nodes(space, query);
    let boosts = spread(space, &seeds, weights)?;

    // Per-unit boost: the best-boosted node referencing it (ties to the
    // lower node id via ascending iteration + strict improvement).
    let mut unit_boost: BTreeMap<UnitId, &NodeBoost> = BTreeMap::new();
    for (node_id, boost) in &boosts {
        let node = space.node(*node_id).expect("boosted node exists");
        for unit_id in &node.unit_refs {
            let better = unit_boost
                .get(unit_id)
                .map(|b| boost.boost > b.boost)
                .unwrap_or(true);
            if better {
                unit_boost.insert(*unit_id, boost);
            }
        }
    }

    let mut candidates: Vec<Candidate> = Vec::new();
    for unit in space.retrievable_units() {
        let sim =
            crate::embedding::cosine_with_query_norm(&query_vec, query_norm, &unit.embedding)?
                .max(0.0);
        let activation = logistic(unit.trace.base_level_activation(now, params.d));
        let pref = tag_overlap(prefs, &unit.preference_tags);
        let base = weights.w_sim * sim
            + weights.w_act * activation
            + weights.w_pref * pref
            + weights.w_emo * unit.emotion_weight;
        let (boost, path) = unit_boost
            .get(&unit.id)
            .map(|b| (b.boost, b.path.clone()))
            .unwrap_or((0.0, Vec::new()));
        candidates.push(Candidate {
            unit_id: unit.id,
            score: base + weights.w_act * boost,
            last_access: unit.trace.last_access(),
            path,
        });
    }
    candidates.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("scores are finite")
            .then(b.last_access.cmp(&a.last_access))
            .then(a.unit_id.cmp(&b.unit_id))
    });
    Ok(candidates
        .into_iter()
        .map(|c| RetrievalHit {
            unit_id: c.unit_id,
            score: c.score,
            path: c.path,
        })
        .collect())
}

/// Top-k retrieval with the access side effect: each returned unit's trace
/// records the retrieval (re-activating pending-forget units) and traversed
/// path edges are noted for logical reflection.
#[allow(clippy::too_many_arguments)]
pub fn retrieve_topk(
    space: &mut Space,
    query: &str,
    k: usize,
    now: Timestamp,
    weights: &ScoreWeights,
    prefs: &BTreeSet<String>,
    params: &ActivationParams,
    embedder: &dyn EmbeddingProvider,
) -> Result<Vec<RetrievalHit>> {
    let mut hits = score_all(space, query, now, weights, prefs, params, embedder)?;
    hits.truncate(k);
    for hit in &hits {
        space.apply_access(hit.unit_id, now)?;
        for edge in &hit.path {
            space.note_traversal(*edge);
        }
    }
    Ok(hits)
}

/// All simple directed paths from `entity_a` to `entity_b` of length <=
/// `max_hops` over usable edges, shortest first, deterministic order.
/// `entity_a == entity_b` yields one empty path.
pub fn multi_hop_path(
    space: &Space,
    entity_a: &str,
    entity_b: &str,
    max_hops: usize,
) -> Result<Vec<Vec<EdgeId>>> {
    let start = space
        .resolve_label(entity_a)
        .ok_or_else(|| Error::UnknownNode(entity_a.to_string()))?;
    let goal = space
        .resolve_label(entity_b)
        .ok_or_else(|| Error::UnknownNode(entity_b.to_string()))?;
    if start == goal {
        return Ok(vec![Vec::new()]);
    }
    let mut paths: Vec<Vec<EdgeId>> = Vec::new();
    let mut stack_path: Vec<EdgeId> = Vec::new();
    let mut visited: BTreeSet<NodeId> = BTreeSet::from([start]);
    fn dfs(
        space: &Space,
        current: NodeId,
        goal: NodeId,
        remaining: usize,
        stack_path: &mut Vec<EdgeId>,
        visited: &mut BTreeSet<NodeId>,
        paths: &mut Vec<Vec<EdgeId>>,
    ) {
        if remaining == 0 {
            return;
        }
        for edge in space.outgoing_edges(current) {
            if visited.contains(&edge.tail) {
                continue;
            }
            stack_path.push(edge.id);
            if edge.tail == goal {
                paths.push(stack_path.clone());
            } else {
                visited.insert(edge.tail);
                dfs(
                    space,
                    edge.tail,
                    goal,
                    remaining - 1,
                    stack_path,
                    visited,
                    paths,
                );
                visited.remove(&edge.tail);
            }
            stack_path.pop();
        }
    }
    dfs(
        space,
        start,
        goal,
        max_hops,
        &mut stack_path,
        &mut visited,
        &mut paths,
    );
    paths.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
    Ok(paths)
}
