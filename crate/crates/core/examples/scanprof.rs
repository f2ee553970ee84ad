use mnemon_core::activation::logistic;
use mnemon_core::corpus::{generate, CorpusParams};
use mnemon_core::embedding::{
    cosine_with_query_norm, squared_norm, EmbeddingProvider, HashEmbedder,
};
use mnemon_core::engine::Engine;
use mnemon_core::retrieve::{score_all, seed_nodes, spread};
use mnemon_core::types::Timestamp;
use std::collections::BTreeSet;
use std::time::Instant;

fn main() {
    let corpus = generate(&CorpusParams {
        facts: 100_000,
        dup: 1,
        ack_rate: 0.0,
        contradictions: 0,
        seed: 42,
        ..CorpusParams::default()
    });
    let mut engine = Engine::with_defaults();
    engine.ingest_corpus("s", &corpus).unwrap();
    let now = Timestamp(corpus.utterances.last().unwrap().ts + 60);
    let space = engine.space("s").unwrap();
    let embedder = HashEmbedder::default();
    let probe = "Where does Milo live?";
    let qv = embedder.embed(probe).unwrap();
    let qn = squared_norm(&qv);
    let params = engine.config().activation;
    let weights = engine.config().scoring;

    let t = Instant::now();
    let mut acc = 0.0;
    for u in space.retrievable_units() {
        acc += cosine_with_query_norm(&qv, qn, &u.embedding).unwrap();
    }
    println!("cosine scan: {:?} (acc {acc:.3})", t.elapsed());

    let t = Instant::now();
    let mut acc = 0.0;
    for u in space.retrievable_units() {
        acc += logistic(u.trace.base_level_activation(now, params.d));
    }
    println!("bla scan:    {:?} (acc {acc:.3})", t.elapsed());

    let t = Instant::now();
    let seeds = seed_nodes(space, probe);
    println!("seed_nodes:  {:?} ({} seeds)", t.elapsed(), seeds.len());

    let t = Instant::now();
    let boosts = spread(space, &seeds, &weights).unwrap();
    println!("spread:      {:?} ({} boosted)", t.elapsed(), boosts.len());

    let t = Instant::now();
    let hits = score_all(
        space,
        probe,
        now,
        &weights,
        &BTreeSet::new(),
        &params,
        &embedder,
    )
    .unwrap();
    println!("score_all:   {:?} ({} hits)", t.elapsed(), hits.len());
}
