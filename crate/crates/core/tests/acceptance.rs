//! Acceptance suite: one test per criterion, each printing a PASS line once
//! its assertions hold (run with `--nocapture` to see them). Criterion 10
//! is a soft latency target: the number is logged, the test never fails on
//! it.
//!
//! Oracles here are written independently of the library internals they
//! check: activation math is recomputed via `exp(-d ln t)` with Kahan
//! summation, retrieval rankings via a brute-force re-scorer with explicit
//! path enumeration, and conservation via fact-key accounting over the
//! generated corpora.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use mnemon_core::activation::{
    base_level_activation, logistic, retention, ActivationParams, ActivationTrace,
};
use mnemon_core::config::EngineConfig;
use mnemon_core::corpus::{generate, CorpusParams};
use mnemon_core::embedding::{cosine, normalize_text, EmbeddingProvider, HashEmbedder};
use mnemon_core::engine::Engine;
use mnemon_core::error::Error;
use mnemon_core::graphstore::Space;
use mnemon_core::hub::SharePermissions;
use mnemon_core::retrieve::{tag_overlap, ScoreWeights};
use mnemon_core::types::{LifecycleState, NodeId, Timestamp, UnitId};

// ---------------------------------------------------------------------
// Independent high-precision reference for Eqs. of the activation module:
// t^{-d} via exp(-d ln t), Kahan summation.
// ---------------------------------------------------------------------

fn reference_decay_sum(ages: &[f64], d: f64) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &age in ages {
        let age = age.max(1.0);
        let term = (-d * age.ln()).exp();
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

fn reference_bla(ages: &[f64], d: f64) -> f64 {
    reference_decay_sum(ages, d).ln()
}

fn reference_retention(ages: &[f64], t: f64, p: &ActivationParams) -> f64 {
    p.offset + (1.0 - p.offset) * (-p.lambda * t / reference_decay_sum(ages, p.d)).exp()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-30)
}

#[test]
fn criterion_01_activation_math_oracle() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let n = rng.gen_range(1..=64);
        let ages: Vec<u64> = (0..n).map(|_| rng.gen_range(1..=100_000_000u64)).collect();
        let ages_f: Vec<f64> = ages.iter().map(|a| *a as f64).collect();
        let d = rng.gen_range(0.3..=0.7);
        let lambda = rng.gen_range(0.1..=10.0);
        let offset = rng.gen_range(0.0..=0.5);
        let t = rng.gen_range(0..=100_000_000u64);
        let params = ActivationParams {
            d,
            lambda,
            offset,
            forget_threshold: (offset + 1.0) / 2.0,
        };

        let bla = base_level_activation(&ages, d).expect("non-empty ages");
        let bla_ref = reference_bla(&ages_f, d);
        let e1 = rel_err(bla, bla_ref);
        let r = retention(&ages, t, &params).expect("non-empty ages");
        let r_ref = reference_retention(&ages_f, t as f64, &params);
        let e2 = rel_err(r, r_ref);
        worst = worst.max(e1).max(e2);
        assert!(
            e1 <= 1e-9,
            "BLA mismatch: {bla} vs {bla_ref} (ages {ages:?}, d {d})"
        );
        assert!(e2 <= 1e-9, "retention mismatch: {r} vs {r_ref}");
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "oracle grid took {elapsed:?}");
    println!(
        "criterion 01 PASS: activation math matches reference on 10^4-point grid \
         (worst rel err {worst:.2e}, {elapsed:?})"
    );
}

#[test]
fn criterion_02_monotonicity_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut checked = 0usize;
    for _ in 0..1_000 {
        let d = rng.gen_range(0.3..=0.7);
        let lambda = rng.gen_range(0.1..=10.0);
        let offset = rng.gen_range(0.0..=0.5);
        let params = ActivationParams {
            d,
            lambda,
            offset,
            forget_threshold: (offset + 1.0) / 2.0,
        };

        // Base trace.
        let n = rng.gen_range(1..=16);
        let mut events: Vec<u64> = (0..n).map(|_| rng.gen_range(0..500_000u64)).collect();
        events.sort_unstable();
        events.dedup();
        let latest = *events.last().expect("non-empty");
        let trace: Vec<Timestamp> = events.iter().map(|e| Timestamp(*e)).collect();
        let trace = ActivationTrace::from_events(&trace).expect("non-empty");

        // Frequency: extra retrievals before the same latest event can only
        // raise retention, from any reference point.
        let mut superset_events = events.clone();
        for _ in 0..rng.gen_range(1..=4) {
            superset_events.push(rng.gen_range(0..=latest));
        }
        superset_events.sort_unstable();
        superset_events.dedup();
        let superset: Vec<Timestamp> = superset_events.iter().map(|e| Timestamp(*e)).collect();
        let superset = ActivationTrace::from_events(&superset).expect("non-empty");
        let now = Timestamp(latest + rng.gen_range(0..100_000u64));
        let r_base = trace.retention(now, &params);
        let r_sup = superset.retention(now, &params);
        assert!(
            r_sup >= r_base - 1e-12,
            "frequency violation: {r_sup} < {r_base}"
        );

        // Recency at the pure-function level: same ages, smaller elapsed
        // time never lowers retention.
        let ages: Vec<u64> = events.iter().map(|e| latest - e + 1).collect();
        let t1 = rng.gen_range(0..100_000u64);
        let t2 = rng.gen_range(0..=t1);
        let r1 = retention(&ages, t1, &params).expect("non-empty");
        let r2 = retention(&ages, t2, &params).expect("non-empty");
        assert!(r2 >= r1 - 1e-12, "recency violation: {r2} < {r1}");

        // Recency at the trace level: shifting the latest retrieval closer
        // to a fixed now (instantaneous convention) never lowers retention.
        let shift = rng.gen_range(0..=(now.0 - latest));
        let mut shifted_events = events.clone();
        *shifted_events.last_mut().expect("non-empty") = latest + shift;
        let shifted: Vec<Timestamp> = shifted_events.iter().map(|e| Timestamp(*e)).collect();
        let shifted = ActivationTrace::from_events(&shifted).expect("non-empty");
        let inst = |tr: &ActivationTrace| {
            let strength: f64 = tr
                .ages_from(now)
                .iter()
                .map(|a| a.count * a.age_secs.powf(-params.d))
                .sum();
            params.offset
                + (1.0 - params.offset)
                    * (-params.lambda * now.since(tr.last_access()) as f64 / strength).exp()
        };
        let r_shifted = inst(&shifted);
        let r_orig = inst(&trace);
        assert!(
            r_shifted >= r_orig - 1e-12,
            "trace recency violation: {r_shifted} < {r_orig}"
        );

        // Bounds.
        for r in [r_base, r_sup, r1, r2, r_shifted, r_orig] {
            assert!(
                (params.offset - 1e-12..=1.0 + 1e-12).contains(&r),
                "retention {r} outside [{}, 1]",
                params.offset
            );
        }
        checked += 1;
    }
    println!(
        "criterion 02 PASS: frequency/recency monotonicity and bounds over {checked} trace pairs"
    );
}

// ---------------------------------------------------------------------
// Brute-force retrieval oracle: independent seed matching, path
// enumeration for spreading activation, and re-scoring.
// ---------------------------------------------------------------------

struct RetrievalOracle<'a> {
    space: &'a Space,
    params: &'a ActivationParams,
}

impl<'a> RetrievalOracle<'a> {
    fn seeds(&self, query: &str) -> Vec<NodeId> {
        // Same matching rule as the engine (cleaned tokens, possessives
        // stripped, whole-phrase containment), recomputed naively.
        let mut tokens: Vec<String> = Vec::new();
        for token in normalize_text(query).split_whitespace() {
            let token = token.trim_matches(|c: char| !c.is_alphanumeric() && c != '-');
            let token = token.strip_suffix("'s").unwrap_or(token);
            if !token.is_empty() {
                tokens.push(token.to_string());
            }
        }
        let haystack = format!(" {} ", tokens.join(" "));
        self.space
            .nodes()
            .filter(|n| {
                std::iter::once(n.label.as_str())
                    .chain(n.aliases.iter().map(|a| a.as_str()))
                    .any(|label| haystack.contains(&format!(" {label} ")))
            })
            .map(|n| n.id)
            .collect()
    }

    /// Max-over-paths boost by explicit enumeration of all simple paths of
    /// length <= max_hops from any seed.
    fn boosts(&self, seeds: &[NodeId], weights: &ScoreWeights) -> BTreeMap<NodeId, f64> {
        let mut best: BTreeMap<NodeId, f64> = seeds.iter().map(|s| (*s, 1.0)).collect();
        for &seed in seeds {
            let mut visited = vec![seed];
            self.walk(
                seed,
                1.0,
                weights.max_hops,
                weights,
                &mut visited,
                &mut best,
            );
        }
        best
    }

    fn walk(
        &self,
        from: NodeId,
        boost: f64,
        remaining: usize,
        weights: &ScoreWeights,
        visited: &mut Vec<NodeId>,
        best: &mut BTreeMap<NodeId, f64>,
    ) {
        if remaining == 0 {
            return;
        }
        let max_strength = self
            .space
            .incident_edges(from)
            .map(|e| e.strength)
            .fold(0.0f64, f64::max);
        if max_strength <= 0.0 {
            return;
        }
        let incident: Vec<_> = self.space.incident_edges(from).collect();
        for edge in incident {
            let other = if edge.head == from {
                edge.tail
            } else {
                edge.head
            };
            if other == from || visited.contains(&other) {
                continue;
            }
            let next = boost * weights.hop_decay * (edge.strength / max_strength);
            let entry = best.entry(other).or_insert(0.0);
            if next > *entry {
                *entry = next;
            }
            visited.push(other);
            self.walk(other, next, remaining - 1, weights, visited, best);
            visited.pop();
        }
    }

    fn rank(
        &self,
        query_vec: &[f32],
        query: &str,
        now: Timestamp,
        weights: &ScoreWeights,
        prefs: &BTreeSet<String>,
    ) -> Vec<(UnitId, f64)> {
        let seeds = self.seeds(query);
        let boosts = self.boosts(&seeds, weights);
        let mut scored: Vec<(UnitId, f64, Timestamp)> = self
            .space
            .retrievable_units()
            .map(|u| {
                let sim = cosine(query_vec, &u.embedding)
                    .expect("dims agree")
                    .max(0.0);
                let act = logistic(u.trace.base_level_activation(now, self.params.d));
                let pref = tag_overlap(prefs, &u.preference_tags);
                let boost = boosts
                    .iter()
                    .filter(|(n, _)| {
                        self.space
                            .node(**n)
                            .map(|node| node.unit_refs.contains(&u.id))
                            .unwrap_or(false)
                    })
                    .map(|(_, b)| *b)
                    .fold(0.0f64, f64::max);
                let score = weights.w_sim * sim
                    + weights.w_act * (act + boost)
                    + weights.w_pref * pref
                    + weights.w_emo * u.emotion_weight;
                (u.id, score, u.trace.last_access())
            })
            .collect();
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .expect("finite scores")
                .then(b.2.cmp(&a.2))
                .then(a.0.cmp(&b.0))
        });
        scored.into_iter().map(|(id, s, _)| (id, s)).collect()
    }
}

fn random_weights(rng: &mut ChaCha8Rng) -> ScoreWeights {
    let raw: [f64; 4] = [
        rng.gen_range(0.05..1.0),
        rng.gen_range(0.05..1.0),
        rng.gen_range(0.05..1.0),
        rng.gen_range(0.05..1.0),
    ];
    let sum: f64 = raw.iter().sum();
    ScoreWeights {
        w_sim: raw[0] / sum,
        w_act: raw[1] / sum,
        w_pref: raw[2] / sum,
        w_emo: raw[3] / sum,
        hop_decay: 0.5,
        max_hops: 2,
    }
}

#[test]
fn criterion_03_retrieval_oracle_equivalence() {
    let started = Instant::now();
    let mut comparisons = 0usize;
    for (units, queries) in [(100usize, 40usize), (1_000, 30), (10_000, 30)] {
        let corpus = generate(&CorpusParams {
            facts: units,
            dup: 1,
            ack_rate: 0.0,
            contradictions: 0,
            seed: 303,
            ..CorpusParams::default()
        });
        let mut engine = Engine::with_defaults();
        engine.ingest_corpus("s", &corpus).unwrap();
        let embedder = HashEmbedder::default();
        let params = engine.config().activation;
        let mut rng = ChaCha8Rng::seed_from_u64(units as u64);
        let now0 = corpus.utterances.last().map(|u| u.ts).unwrap_or(0) + 60;

        for qi in 0..queries {
            let probe = corpus
                .probes
                .choose(&mut rng)
                .expect("probes exist")
                .clone();
            for wi in 0..10 {
                let weights = random_weights(&mut rng);
                let prefs: BTreeSet<String> = if rng.gen_bool(0.5) {
                    BTreeSet::new()
                } else {
                    [probe.fact_key.split(' ').next().unwrap().to_string()].into()
                };
                let k = rng.gen_range(1..=10);
                let now = Timestamp(now0 + (qi * 10 + wi) as u64);

                let expected: Vec<UnitId> = {
                    let space = engine.space("s").unwrap();
                    let oracle = RetrievalOracle {
                        space,
                        params: &params,
                    };
                    let qv = embedder.embed(&probe.question).unwrap();
                    oracle
                        .rank(&qv, &probe.question, now, &weights, &prefs)
                        .into_iter()
                        .take(k)
                        .map(|(id, _)| id)
                        .collect()
                };
                // retrieve_topk mutates traces; the oracle ran on the
                // pre-call state, as does the call itself.
                let got: Vec<UnitId> = {
                    let space = engine.space_mut("s").unwrap();
                    mnemon_core::retrieve::retrieve_topk(
                        space,
                        &probe.question,
                        k,
                        now,
                        &weights,
                        &prefs,
                        &params,
                        &embedder,
                    )
                    .unwrap()
                    .into_iter()
                    .map(|h| h.unit_id)
                    .collect()
                };
                assert_eq!(
                    got, expected,
                    "ranking mismatch at units={units} query={qi} weights={wi}"
                );
                comparisons += 1;
            }
        }
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 60.0,
        "oracle comparison took {elapsed:?}"
    );
    println!(
        "criterion 03 PASS: retrieve_topk equals the exhaustive oracle on {comparisons} \
         (query, weights) runs across 10^2..10^4-unit stores ({elapsed:?})"
    );
}

#[test]
fn criterion_04_pruning_conservation_and_reduction() {
    let corpus = generate(&CorpusParams {
        facts: 200,
        dup: 10,
        ack_rate: 0.5,
        contradictions: 0,
        seed: 404,
        ..CorpusParams::default()
    });
    let mut engine = Engine::with_defaults();
    engine.ingest_corpus("s", &corpus).unwrap();
    let now = Timestamp(corpus.utterances.last().unwrap().ts + 3_600);

    // Injected-redundancy upper bound: everything above one (shortest) copy
    // per fact key is removable.
    let upper_bound = {
        let space = engine.space("s").unwrap();
        let mut min_per_key: BTreeMap<&str, usize> = BTreeMap::new();
        for unit in space.retrievable_units() {
            if let Some(key) = unit.fact_key() {
                let cur = min_per_key.entry(key).or_insert(usize::MAX);
                *cur = (*cur).min(unit.token_count());
            }
        }
        space.store_tokens() - min_per_key.values().sum::<usize>()
    };

    let report = engine.prune_space("s", now).unwrap();
    let achieved = report.tokens_before - report.tokens_after;
    assert!(
        achieved as f64 >= 0.8 * upper_bound as f64,
        "token reduction {achieved} below 80% of upper bound {upper_bound}"
    );

    // (a) zero fact-key loss: all 200 probes still answer with the right
    // key. Probes are spaced an hour apart; each retrieval records an
    // access, and back-to-back probes within the age clamp would let
    // freshly-boosted lookalikes shadow later targets.
    let mut answered = 0usize;
    for (i, probe) in corpus.probes.iter().enumerate() {
        let hits = engine
            .query(
                "s",
                &probe.question,
                3,
                &BTreeSet::new(),
                now.plus(3_600 * (i as u64 + 1)),
            )
            .unwrap();
        let top = hits.first().expect("store answers every probe");
        assert_eq!(
            top.fact.as_ref().map(|f| f.key.as_str()),
            Some(probe.fact_key.as_str()),
            "probe {:?} answered with the wrong key",
            probe.question
        );
        answered += 1;
    }

    // (c) a second pass is a no-op.
    let second = engine
        .prune_space("s", now.plus(3_600 * (corpus.probes.len() as u64 + 2)))
        .unwrap();
    assert!(second.is_noop(), "second prune pass did work: {second:?}");

    println!(
        "criterion 04 PASS: {answered}/200 probes keep their keys, reduction {achieved}/{upper_bound} \
         tokens ({:.1}% of bound), second pass no-op",
        100.0 * achieved as f64 / upper_bound as f64
    );
}

#[test]
fn criterion_05_warranty_scenario_golden() {
    let mut config = EngineConfig::default();
    config.activation.lambda = 1e-6; // keep the sweep quiet at dialogue scale
    let mut engine = Engine::new(config).unwrap();
    let question = "What is the after-sales service period for this product?";
    let answer = "7-day no-reason return and exchange, plus 1-year free warranty.";
    let ack = "Okay, I understand.";
    let mut ts = 60;
    for _ in 0..3 {
        engine.ingest("s", question, "user", Timestamp(ts)).unwrap();
        engine
            .ingest("s", answer, "agent", Timestamp(ts + 20))
            .unwrap();
        engine.ingest("s", ack, "user", Timestamp(ts + 40)).unwrap();
        ts += 60;
    }

    let report = engine.reflect_space("s", Timestamp(ts + 60), &[]).unwrap();
    assert!(report.prune.units_removed >= 2, "{report:?}");

    let space = engine.space("s").unwrap();
    let retained: Vec<_> = space.retrievable_units().collect();
    assert_eq!(retained.len(), 1, "exactly one retained record");
    let unit = retained[0];
    assert_eq!(
        unit.provenance.len(),
        3,
        "provenance unions the three answers"
    );
    assert!(unit.content.contains("warranty"));
    assert_eq!(
        unit.fact.as_ref().map(|f| f.key.as_str()),
        Some("after-sales service period")
    );
    let acks: Vec<_> = space
        .units()
        .filter(|u| u.content == normalize_text(ack))
        .collect();
    assert!(!acks.is_empty());
    assert!(
        acks.iter().all(|u| u.state == LifecycleState::SoftDeleted),
        "acknowledgments are soft-deleted"
    );
    println!(
        "criterion 05 PASS: warranty dialogue reflects to 1 retained record \
         (provenance 3), acknowledgments soft-deleted"
    );
}

#[test]
fn criterion_06_forgetting_threshold_inversion() {
    // Day-scale units: one time unit here stands for a day slice; lambda
    // 0.1 puts the virgin crossing at t* = ln(0.9/0.25)/0.1 ~ 12.81 units.
    let params = ActivationParams {
        d: 0.5,
        lambda: 0.1,
        offset: 0.1,
        forget_threshold: 0.35,
    };
    let t_star =
        ((1.0 - params.offset) / (params.forget_threshold - params.offset)).ln() / params.lambda;
    // Closed form, verified numerically.
    let at_crossing = params.offset + (1.0 - params.offset) * (-params.lambda * t_star).exp();
    assert!((at_crossing - params.forget_threshold).abs() < 1e-12);

    let config = EngineConfig {
        activation: params,
        ..EngineConfig::default()
    };
    let mut engine = Engine::new(config).unwrap();
    engine
        .ingest("s", "Milo lives in Paris.", "user", Timestamp(1_000))
        .unwrap();
    let unit_id = engine.space("s").unwrap().units().next().unwrap().id;

    // Sweep every time unit; the unit must pend at the first sweep after
    // t* and not before (tolerance: one sweep interval).
    let mut pended_at = None;
    for dt in 1..=20u64 {
        let report = engine
            .sweep_space("s", Timestamp(1_000 + dt), false)
            .unwrap();
        if report.to_pending.contains(&unit_id) {
            pended_at = Some(dt);
            break;
        }
    }
    let pended_at = pended_at.expect("unit eventually pends");
    assert_eq!(
        pended_at,
        t_star.ceil() as u64,
        "pended at {pended_at}, expected first sweep after t* = {t_star:.3}"
    );

    // A daily-accessed unit never leaves Active over 90 simulated days
    // (10 units per day, sweep half a day after each access).
    let day = 10u64;
    let config = EngineConfig {
        activation: params,
        ..EngineConfig::default()
    };
    let mut engine = Engine::new(config).unwrap();
    engine
        .ingest("s", "Milo lives in Paris.", "user", Timestamp(day))
        .unwrap();
    let unit_id = engine.space("s").unwrap().units().next().unwrap().id;
    for d in 1..=90u64 {
        let access_at = Timestamp(day * (d + 1));
        engine
            .space_mut("s")
            .unwrap()
            .apply_access(unit_id, access_at)
            .unwrap();
        engine
            .sweep_space("s", Timestamp(day * (d + 1) + day / 2), false)
            .unwrap();
        let state = engine.space("s").unwrap().unit(unit_id).unwrap().state;
        assert_eq!(state, LifecycleState::Active, "left Active on day {d}");
    }
    println!(
        "criterion 06 PASS: virgin unit pends at sweep {pended_at} (t* = {t_star:.3}), \
         daily-accessed unit stays Active for 90 days"
    );
}

#[test]
fn criterion_07_factual_reflection_resolves_contradictions() {
    let corpus = generate(&CorpusParams {
        facts: 200,
        dup: 3,
        ack_rate: 0.3,
        contradictions: 50,
        seed: 707,
        ..CorpusParams::default()
    });
    let mut config = EngineConfig::default();
    config.activation.lambda = 1e-9; // reflection sweep stays quiet
    let mut engine = Engine::new(config).unwrap();
    engine.ingest_corpus("s", &corpus).unwrap();
    let now = Timestamp(corpus.utterances.last().unwrap().ts + 3_600);
    let report = engine.reflect_space("s", now, &[]).unwrap();
    assert!(
        report.factual_resolutions.len() >= 50,
        "{}",
        report.factual_resolutions.len()
    );

    let contradicted: Vec<_> = corpus
        .contradicted
        .iter()
        .map(|i| &corpus.probes[*i])
        .collect();
    assert_eq!(contradicted.len(), 50, "50 contradicted probes identified");

    let mut checked = 0usize;
    for (i, probe) in contradicted.iter().enumerate() {
        let hits = engine
            .query(
                "s",
                &probe.question,
                3,
                &BTreeSet::new(),
                now.plus(3_600 * (i as u64 + 1)),
            )
            .unwrap();
        let top = hits.first().expect("probe answered");
        assert_eq!(
            top.fact.as_ref().map(|f| f.key.as_str()),
            Some(probe.fact_key.as_str())
        );
        assert_eq!(
            top.fact.as_ref().map(|f| f.value.as_str()),
            Some(probe.expected_value.as_str()),
            "stale value returned for {:?}",
            probe.question
        );
        checked += 1;
    }

    // Every older-value unit is Compressed with a supersession pointer.
    let space = engine.space("s").unwrap();
    let keys: BTreeSet<&str> = contradicted.iter().map(|p| p.fact_key.as_str()).collect();
    let mut compressed = 0usize;
    for unit in space.units() {
        let Some(fact) = &unit.fact else { continue };
        if !keys.contains(fact.key.as_str()) {
            continue;
        }
        let expected = contradicted
            .iter()
            .find(|p| p.fact_key == fact.key)
            .map(|p| p.expected_value.as_str())
            .expect("key is contradicted");
        if fact.value != expected && unit.merged_into.is_none() {
            assert_eq!(
                unit.state,
                LifecycleState::Compressed,
                "stale unit {} not compressed",
                unit.id
            );
            assert!(unit.superseded_by.is_some(), "missing supersession pointer");
            compressed += 1;
        }
    }
    assert!(compressed >= 50, "only {compressed} stale units compressed");
    println!(
        "criterion 07 PASS: {checked}/50 contradicted keys answer with the newer value; \
         {compressed} stale units compressed with supersession pointers"
    );
}

#[test]
fn criterion_08_hub_privacy_consistency_minimality() {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let topic = "live_in";
    for run in 0..1_000 {
        let mut engine = Engine::with_defaults();
        for (agent, space) in [("alpha", "space-alpha"), ("beta", "space-beta")] {
            engine
                .register_agent(mnemon_core::hub::AgentProfile {
                    agent_id: agent.to_string(),
                    responsibility_domain: [topic.to_string()].into(),
                    behavior_interface: ["query".to_string()].into(),
                    space_id: space.to_string(),
                })
                .unwrap();
        }

        // Seed both spaces with public facts and some private ones. The
        // shared topic is the relation itself; private units carry a
        // detectable "vault" value and the explicit privacy marker.
        let mut ts = 1_000u64;
        for (agent_idx, space) in ["space-alpha", "space-beta"].iter().enumerate() {
            let n = rng.gen_range(1..=4);
            for i in 0..n {
                let name = ["Milo", "Rena", "Ada", "Ivo"][rng.gen_range(0..4)];
                let text = if rng.gen_bool(0.3) {
                    format!("{name}{agent_idx} lives in Vault{run}x{i}, keep it private.")
                } else {
                    let city = ["Paris", "Berlin", "Tokyo", "Oslo"][rng.gen_range(0..4)];
                    format!("{name}{agent_idx} lives in {city}{i}.")
                };
                engine.ingest(space, &text, "user", Timestamp(ts)).unwrap();
                ts += 10;
            }
        }

        let now = Timestamp(ts);
        let topic_tags: BTreeSet<String> = [topic.to_string()].into();
        let mut envelopes = Vec::new();
        for agent in ["alpha", "beta"] {
            match engine.share(agent, &topic_tags, SharePermissions::Public, now) {
                Ok(env) => envelopes.push((agent, env)),
                Err(Error::EmptySelection) => {} // everything private: fine
                Err(other) => panic!("share failed: {other}"),
            }
        }

        for (origin, envelope) in &envelopes {
            // Privacy: no private value ever crosses the wire.
            for summary in &envelope.summary_units {
                assert!(
                    !summary.summary.contains("vault"),
                    "run {run}: private value leaked from {origin}: {:?}",
                    summary.summary
                );
            }
            // Minimality: transmitted tokens never exceed the source units'.
            let source_space = if *origin == "alpha" {
                "space-alpha"
            } else {
                "space-beta"
            };
            let source_tokens: usize = engine
                .space(source_space)
                .unwrap()
                .units()
                .map(|u| u.token_count())
                .sum();
            assert!(envelope.token_count() <= source_tokens);
            let target = if *origin == "alpha" { "beta" } else { "alpha" };
            engine
                .apply_envelope(envelope, target, now.plus(10))
                .unwrap();
        }

        // Consistency: non-private fact-key sets for the topic agree.
        let keys = |space: &str| -> BTreeSet<String> {
            engine
                .space(space)
                .unwrap()
                .retrievable_units()
                .filter(|u| !u.is_private())
                .filter_map(|u| u.fact_key().map(|k| k.to_string()))
                .collect()
        };
        assert_eq!(
            keys("space-alpha"),
            keys("space-beta"),
            "run {run}: shared-topic fact keys diverge"
        );
    }
    println!(
        "criterion 08 PASS: 1000 fuzzed 2-agent runs with zero privacy leaks, \
         converging fact-key sets, and summary-level envelopes"
    );
}

#[test]
fn criterion_09_token_efficiency_proxy() {
    let corpus = generate(&CorpusParams {
        facts: 400,
        dup: 10,
        ack_rate: 0.6,
        contradictions: 0,
        seed: 909,
        ..CorpusParams::default()
    });
    assert!(
        corpus.total_tokens() >= 20_000,
        "dialogue too small: {} tokens",
        corpus.total_tokens()
    );
    let mut engine = Engine::with_defaults();
    engine.ingest_corpus("s", &corpus).unwrap();
    let now = Timestamp(corpus.utterances.last().unwrap().ts + 3_600);

    let full_history = engine.stats("s").unwrap().full_history_tokens;
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let probes: Vec<_> = corpus
        .probes
        .choose_multiple(&mut rng, 50)
        .cloned()
        .collect();
    let mut retrieved_total = 0usize;
    for (i, probe) in probes.iter().enumerate() {
        let hits = engine
            .query(
                "s",
                &probe.question,
                5,
                &BTreeSet::new(),
                now.plus(3_600 * (i as u64 + 1)),
            )
            .unwrap();
        let top = hits.first().expect("probe answered");
        assert_eq!(
            top.fact.as_ref().map(|f| f.key.as_str()),
            Some(probe.fact_key.as_str()),
            "probe {:?} failed",
            probe.question
        );
        retrieved_total += hits
            .iter()
            .map(|h| h.content.split_whitespace().count())
            .sum::<usize>();
    }
    let avg_retrieved = retrieved_total as f64 / probes.len() as f64;
    let ratio = avg_retrieved / full_history as f64;
    assert!(
        ratio <= 0.10,
        "retrieved context ratio {ratio:.4} exceeds 10% of {full_history} tokens"
    );
    println!(
        "criterion 09 PASS: 50/50 probes answered; avg retrieved context \
         {avg_retrieved:.1} tokens = {:.2}% of the {full_history}-token history",
        ratio * 100.0
    );
}

#[test]
fn criterion_10_latency_soft_target() {
    let corpus = generate(&CorpusParams {
        facts: 100_000,
        dup: 1,
        ack_rate: 0.0,
        contradictions: 0,
        seed: 1010,
        ..CorpusParams::default()
    });
    let mut engine = Engine::with_defaults();
    let build = Instant::now();
    engine.ingest_corpus("s", &corpus).unwrap();
    let build_secs = build.elapsed().as_secs_f64();
    let now = Timestamp(corpus.utterances.last().unwrap().ts + 60);

    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut latencies: Vec<f64> = Vec::new();
    for probe in corpus.probes.choose_multiple(&mut rng, 100) {
        let start = Instant::now();
        let hits = engine
            .query("s", &probe.question, 5, &BTreeSet::new(), now)
            .unwrap();
        latencies.push(start.elapsed().as_secs_f64() * 1000.0);
        assert!(!hits.is_empty());
    }
    latencies.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let p50 = latencies[latencies.len() / 2];
    let p95 = latencies[(latencies.len() as f64 * 0.95) as usize - 1];
    let verdict = if p95 <= 100.0 {
        "within"
    } else {
        "OVER (soft target, logged)"
    };
    println!(
        "criterion 10 PASS (soft): 10^5-unit store built in {build_secs:.1}s; exact-scan \
         p50 {p50:.1} ms, p95 {p95:.1} ms — {verdict} the 100 ms target"
    );
}

#[test]
fn criterion_11_persistence_round_trip() {
    let corpus = generate(&CorpusParams {
        facts: 10_000,
        dup: 1,
        ack_rate: 0.0,
        contradictions: 0,
        seed: 1111,
        ..CorpusParams::default()
    });
    let mut engine = Engine::with_defaults();
    engine.ingest_corpus("s", &corpus).unwrap();
    let now = Timestamp(corpus.utterances.last().unwrap().ts + 60);

    let dir = tempfile::tempdir().unwrap();
    mnemon_core::snapshot::snapshot(&engine, dir.path()).unwrap();
    let mut restored = Engine::with_defaults();
    mnemon_core::snapshot::load(&mut restored, dir.path()).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    for probe in corpus.probes.choose_multiple(&mut rng, 100) {
        let a = engine
            .score("s", &probe.question, 5, &BTreeSet::new(), now)
            .unwrap();
        let b = restored
            .score("s", &probe.question, 5, &BTreeSet::new(), now)
            .unwrap();
        let a_key: Vec<(UnitId, u64, &str)> = a
            .iter()
            .map(|h| (h.unit_id, h.score.to_bits(), h.content.as_str()))
            .collect();
        let b_key: Vec<(UnitId, u64, &str)> = b
            .iter()
            .map(|h| (h.unit_id, h.score.to_bits(), h.content.as_str()))
            .collect();
        assert_eq!(
            a_key, b_key,
            "query {:?} diverged after round trip",
            probe.question
        );
    }

    // Corrupted snapshots are rejected.
    let records = dir.path().join("records.jsonl");
    let body = std::fs::read(&records).unwrap();
    std::fs::write(&records, &body[..body.len() - 37]).unwrap();
    let mut broken = Engine::with_defaults();
    assert!(matches!(
        mnemon_core::snapshot::load(&mut broken, dir.path()),
        Err(Error::CorruptSnapshot(_))
    ));
    println!(
        "criterion 11 PASS: 10^4-unit snapshot round-trip preserves 100 query results \
         exactly; truncated snapshots rejected"
    );
}
