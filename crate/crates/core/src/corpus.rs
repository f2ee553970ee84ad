//! Synthetic dialogue generator with controlled duplication, acknowledgment
//! noise, and contradiction injections, plus probe questions with answer
//! keys. The acceptance suite and the `bench`/`gen-corpus` commands build
//! their corpora here.
//!
//! Every generated utterance parses deterministically under the default
//! annotator to a known (fact key, value), so conservation and correctness
//! can be checked mechanically. Restatement variants of one fact keep the
//! same key and value; some differ only in whitespace or case (collapsed at
//! ingest), the rest differ in punctuation or light filler (collapsed by
//! semantic pruning).

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusParams {
    /// Distinct facts (and probe questions).
    pub facts: usize,
    /// Occurrences per fact, including the canonical statement.
    pub dup: usize,
    /// Probability of an acknowledgment after each fact utterance.
    pub ack_rate: f64,
    /// Facts later contradicted by a new value (counted within `facts`).
    pub contradictions: usize,
    pub seed: u64,
    pub start_ts: u64,
    pub step_secs: u64,
}

impl Default for CorpusParams {
    fn default() -> Self {
        CorpusParams {
            facts: 100,
            dup: 10,
            ack_rate: 0.5,
            contradictions: 0,
            seed: 7,
            start_ts: 1_000_000,
            step_secs: 60,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusUtterance {
    pub utterance: String,
    pub speaker: String,
    pub ts: u64,
}

/// A probe question with its expected answer key (and the value current
/// after all injections).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Probe {
    pub question: String,
    pub fact_key: String,
    pub expected_value: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Corpus {
    pub utterances: Vec<CorpusUtterance>,
    pub probes: Vec<Probe>,
    pub fact_keys: BTreeSet<String>,
    /// Probe indexes whose fact was later contradicted.
    pub contradicted: BTreeSet<usize>,
}

impl Corpus {
    pub fn total_tokens(&self) -> usize {
        self.utterances
            .iter()
            .map(|u| u.utterance.split_whitespace().count())
            .sum()
    }
}

const NAMES: &[&str] = &[
    "Milo", "Rena", "Ada", "Ivo", "Juno", "Kira", "Liam", "Nora", "Otis", "Pia", "Quinn", "Rolf",
    "Sana", "Tova", "Ugo", "Vera", "Wren", "Xeno", "Yara", "Zadie", "Bram", "Cleo", "Dara", "Enzo",
];

const CITIES: &[&str] = &[
    "Paris", "Berlin", "Tokyo", "Oslo", "Lima", "Porto", "Quito", "Seoul", "Dakar", "Perth",
    "Lagos", "Turin", "Malmo", "Kyoto", "Basel", "Tunis",
];

const ORGS: &[&str] = &[
    "Zephyr", "Helios", "Aurora", "Borealis", "Cobalt", "Drift", "Ember", "Fathom", "Glacier",
    "Harbor", "Iris", "Juniper",
];

const ATTRS: &[&str] = &["color", "drink", "dish", "sport", "song", "season"];

const VALUES: &[&str] = &[
    "teal", "coffee", "ramen", "rowing", "nocturne", "autumn", "crimson", "matcha", "paella",
    "cycling", "bolero", "spring", "indigo", "cocoa", "risotto", "fencing", "aubade", "winter",
];

const TEAMS: &[&str] = &[
    "Atlas", "Beacon", "Cinder", "Dynamo", "Echo", "Falcon", "Granite", "Horizon", "Ivory",
    "Jasper",
];

const DAYS: &[&str] = &["Monday", "Tuesday", "Wednesday", "Thursday", "Friday"];

const ACKS: &[&str] = &[
    "Okay, I understand.",
    "Got it, thanks!",
    "Alright, noted.",
    "Sure, understood.",
    "Okay, great.",
];

fn pick(pool: &[&str], i: usize) -> String {
    let base = pool[i % pool.len()];
    let round = i / pool.len();
    if round == 0 {
        base.to_string()
    } else {
        format!("{base}{round}")
    }
}

/// One fact: its canonical sentence, restatement variants, probe, and the
/// contradicting sentence (same key, new value).
#[derive(Debug, Clone)]
struct FactTemplate {
    key: String,
    value: String,
    canonical: String,
    probe: String,
    contradiction: String,
    contradiction_value: String,
}

// Name indices are striped per family (3k, 3k+1, 3k+2) so one synthetic
// person never carries facts from two families; probes stay unambiguous.
fn fact_template(i: usize) -> FactTemplate {
    match i % 4 {
        0 => {
            let name = pick(NAMES, (i / 4) * 3);
            let city = pick(CITIES, i / 4);
            let city2 = pick(CITIES, i / 4 + 3);
            FactTemplate {
                key: format!("{} live_in", name.to_lowercase()),
                value: city.to_lowercase(),
                canonical: format!("{name} lives in {city}."),
                probe: format!("Where does {name} live?"),
                contradiction: format!("{name} lives in {city2}."),
                contradiction_value: city2.to_lowercase(),
            }
        }
        1 => {
            let name = pick(NAMES, (i / 4) * 3 + 1);
            let org = pick(ORGS, i / 4);
            let org2 = pick(ORGS, i / 4 + 5);
            FactTemplate {
                key: format!("{} work_at", name.to_lowercase()),
                value: org.to_lowercase(),
                canonical: format!("{name} works at {org}."),
                probe: format!("Where does {name} work?"),
                contradiction: format!("{name} works at {org2}."),
                contradiction_value: org2.to_lowercase(),
            }
        }
        2 => {
            let name = pick(NAMES, (i / 4) * 3 + 2);
            let attr = ATTRS[(i / 4) % ATTRS.len()];
            let value = pick(VALUES, i / 4).to_lowercase();
            let value2 = pick(VALUES, i / 4 + 7).to_lowercase();
            FactTemplate {
                key: format!("{} favorite {attr}", name.to_lowercase()),
                value: value.clone(),
                canonical: format!("{name}'s favorite {attr} is {value}."),
                probe: format!("What is {name}'s favorite {attr}?"),
                contradiction: format!("{name}'s favorite {attr} is {value2}."),
                contradiction_value: value2,
            }
        }
        _ => {
            let team = pick(TEAMS, i / 4);
            let day = DAYS[(i / 4) % DAYS.len()];
            let day2 = DAYS[(i / 4 + 2) % DAYS.len()];
            FactTemplate {
                key: format!("{} meeting", team.to_lowercase()),
                value: format!("every {}", day.to_lowercase()),
                canonical: format!("The {team} meeting is every {day}."),
                probe: format!("When is the {team} meeting?"),
                contradiction: format!("The {team} meeting is every {day2}."),
                contradiction_value: format!("every {}", day2.to_lowercase()),
            }
        }
    }
}

/// Restatement variant `v` of a canonical sentence. All variants keep the
/// same extracted key and value; they differ only in case and whitespace
/// (collapsed at ingest) or punctuation (collapsed by semantic pruning at
/// the duplicate threshold; see the pinned similarity table).
fn variant(canonical: &str, v: usize) -> String {
    let base = canonical.trim_end_matches('.');
    match v % 10 {
        0 => canonical.to_string(),
        1 => format!("{base}!"),
        2 => base.to_string(),
        3 => format!("{base},"),
        4 => canonical.to_uppercase(),
        5 => format!(" {canonical} "),
        6 => canonical.replace(' ', "  "),
        7 => format!("{base}!").to_uppercase(),
        8 => canonical.replace(' ', "\t"),
        _ => format!("  {base}  ,"),
    }
}

/// Generate a corpus. Deterministic per `params.seed`.
pub fn generate(params: &CorpusParams) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let templates: Vec<FactTemplate> = (0..params.facts).map(fact_template).collect();

    // Schedule (fact, occurrence) pairs, canonical first per fact, the rest
    // shuffled across the stream.
    let mut occurrences: Vec<(usize, usize)> = Vec::new();
    for (i, _) in templates.iter().enumerate() {
        for v in 1..params.dup.max(1) {
            occurrences.push((i, v));
        }
    }
    occurrences.shuffle(&mut rng);
    let mut schedule: Vec<(usize, usize)> = (0..templates.len()).map(|i| (i, 0)).collect();
    schedule.extend(occurrences);

    let mut utterances = Vec::new();
    let mut ts = params.start_ts;
    for (fact_idx, occurrence) in schedule {
        let text = variant(&templates[fact_idx].canonical, occurrence);
        utterances.push(CorpusUtterance {
            utterance: text,
            speaker: "user".to_string(),
            ts,
        });
        ts += params.step_secs;
        if rng.gen_bool(params.ack_rate.clamp(0.0, 1.0)) {
            let ack = ACKS[rng.gen_range(0..ACKS.len())];
            utterances.push(CorpusUtterance {
                utterance: ack.to_string(),
                speaker: "agent".to_string(),
                ts,
            });
            ts += params.step_secs;
        }
    }

    // Contradictions arrive well after the main stream (outside any
    // plausible ambiguity window). Only the functional-relation families
    // (live_in, work_at) are eligible.
    let eligible: Vec<usize> = (0..templates.len()).filter(|i| i % 4 < 2).collect();
    let contradicted: BTreeSet<usize> = eligible.into_iter().take(params.contradictions).collect();
    ts += 30 * 86_400;
    for &i in &contradicted {
        utterances.push(CorpusUtterance {
            utterance: templates[i].contradiction.clone(),
            speaker: "user".to_string(),
            ts,
        });
        ts += params.step_secs;
    }

    let probes: Vec<Probe> = templates
        .iter()
        .enumerate()
        .map(|(i, t)| Probe {
            question: t.probe.clone(),
            fact_key: t.key.clone(),
            expected_value: if contradicted.contains(&i) {
                t.contradiction_value.clone()
            } else {
                t.value.clone()
            },
        })
        .collect();
    let fact_keys: BTreeSet<String> = templates.iter().map(|t| t.key.clone()).collect();
    assert_eq!(fact_keys.len(), params.facts, "fact keys must be distinct");

    Corpus {
        utterances,
        probes,
        fact_keys,
        contradicted,
    }
}
