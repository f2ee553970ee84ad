//! Semantic anchor annotation and structured memory unit generation.
//!
//! The default annotator is rule-based and fully deterministic: fixed
//! tokenization, pattern-based entity detection (capitalized spans,
//! quantity+unit spans, and a gazetteer are strong; remaining content nouns
//! are weak), first-clause subject–verb–object extraction, keyword-driven
//! temporal classification, and a weighted emotion lexicon. The rule tables
//! live under `data/` and are versioned with the crate; config may point at
//! replacement files.
//!
//! An external model can stand in behind the same wire shape (see
//! [`crate::engine::AnnotatorAdapter`]); tests always use the default rules.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::activation::ActivationTrace;
use crate::embedding::{normalize_text, EmbeddingProvider};
use crate::error::{Error, Result};
use crate::types::{EmotionLabel, EmotionTag, Fact, LifecycleState, MemoryUnit, Timestamp, UnitId};

/// Entity strength. Only strong entities become knowledge-graph nodes; weak
/// entities live inside unit anchors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Strong,
    Weak,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub surface: String,
    pub kind: EntityKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triple {
    pub subject: String,
    pub predicate: String,
    pub object: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub head: String,
    pub label: String,
    pub tail: String,
}

/// Temporal framing of an utterance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemporalClass {
    Past,
    Present,
    Future,
    Recurring,
    Atemporal,
}

/// Everything the annotator extracts from one utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticAnchorSet {
    pub entities: Vec<Entity>,
    pub triples: Vec<Triple>,
    pub facts: Vec<Fact>,
    pub relations: Vec<Relation>,
    pub temporal_class: TemporalClass,
    pub emotion: EmotionTag,
}

impl SemanticAnchorSet {
    pub fn empty() -> Self {
        SemanticAnchorSet {
            entities: Vec::new(),
            triples: Vec::new(),
            facts: Vec::new(),
            relations: Vec::new(),
            temporal_class: TemporalClass::Atemporal,
            emotion: EmotionTag::neutral(),
        }
    }

    pub fn strong_entities(&self) -> impl Iterator<Item = &str> {
        self.entities
            .iter()
            .filter(|e| e.kind == EntityKind::Strong)
            .map(|e| e.surface.as_str())
    }
}

/// Dialogue role of an utterance, classified by surface patterns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtteranceRole {
    Question,
    Acknowledgment,
    Statement,
}

const STOPWORDS: &[&str] = &[
    "the", "a", "an", "my", "our", "your", "his", "her", "its", "their", "this", "that", "these",
    "those", "i", "we", "you", "he", "she", "it", "they", "me", "us", "them", "and", "or", "but",
    "so", "as", "if", "then", "than", "too", "very", "just", "also", "there", "here", "please",
    "by", "way", "know", "again", "still", "now", "today", "yes", "no", "not", "really", "will",
    "would", "can", "could", "should", "shall", "must", "might", "may", "do", "does", "did",
    "right", "ok", "okay",
];

const ACK_WORDS: &[&str] = &[
    "okay",
    "ok",
    "alright",
    "sure",
    "fine",
    "understood",
    "understand",
    "got",
    "it",
    "i",
    "thanks",
    "thank",
    "you",
    "yes",
    "yep",
    "noted",
    "right",
    "see",
    "cool",
    "perfect",
    "great",
];

const INTERROGATIVES: &[&str] = &[
    "what", "when", "where", "who", "whom", "whose", "which", "why", "how",
];

const QUESTION_LEADS: &[&str] = &[
    "is", "are", "was", "were", "do", "does", "did", "can", "could", "will", "would", "should",
];

const PREPOSITIONS: &[&str] = &["in", "at", "on", "to", "from", "near"];

const COPULAS: &[&str] = &["is", "are", "was", "were", "am"];

/// (surface form, lemma, past tense?)
const VERBS: &[(&str, &str, bool)] = &[
    ("live", "live", false),
    ("lives", "live", false),
    ("lived", "live", true),
    ("work", "work", false),
    ("works", "work", false),
    ("worked", "work", true),
    ("like", "like", false),
    ("likes", "like", false),
    ("liked", "like", true),
    ("prefer", "prefer", false),
    ("prefers", "prefer", false),
    ("preferred", "prefer", true),
    ("love", "love", false),
    ("loves", "love", false),
    ("loved", "love", true),
    ("move", "move", false),
    ("moves", "move", false),
    ("moved", "move", true),
    ("visit", "visit", false),
    ("visits", "visit", false),
    ("visited", "visit", true),
    ("travel", "travel", false),
    ("travels", "travel", false),
    ("traveled", "travel", true),
    ("meet", "meet", false),
    ("meets", "meet", false),
    ("met", "meet", true),
    ("own", "own", false),
    ("owns", "own", false),
    ("owned", "own", true),
    ("use", "use", false),
    ("uses", "use", false),
    ("used", "use", true),
    ("drink", "drink", false),
    ("drinks", "drink", false),
    ("drank", "drink", true),
    ("play", "play", false),
    ("plays", "play", false),
    ("played", "play", true),
    ("teach", "teach", false),
    ("teaches", "teach", false),
    ("taught", "teach", true),
    ("manage", "manage", false),
    ("manages", "manage", false),
    ("managed", "manage", true),
    ("report", "report", false),
    ("reports", "report", false),
    ("reported", "report", true),
    ("start", "start", false),
    ("starts", "start", false),
    ("started", "start", true),
    ("run", "run", false),
    ("runs", "run", false),
    ("ran", "run", true),
    ("speak", "speak", false),
    ("speaks", "speak", false),
    ("spoke", "speak", true),
    ("study", "study", false),
    ("studies", "study", false),
    ("studied", "study", true),
    ("take", "take", false),
    ("takes", "take", false),
    ("took", "take", true),
    ("expire", "expire", false),
    ("expires", "expire", false),
    ("expired", "expire", true),
    ("have", "have", false),
    ("has", "have", false),
    ("had", "have", true),
];

const RECURRING_MARKERS: &[&str] = &[
    "every", "always", "daily", "weekly", "monthly", "usually", "each",
];
const FUTURE_MARKERS: &[&str] = &["will", "tomorrow", "shall", "soon", "upcoming"];
const PAST_MARKERS: &[&str] = &["yesterday", "ago", "previously", "formerly"];

/// Loaded rule tables: gazetteer plus emotion lexicon.
#[derive(Debug, Clone)]
pub struct AnnotatorRules {
    gazetteer: BTreeSet<String>,
    emotion_lexicon: BTreeMap<String, (EmotionLabel, f64)>,
}

impl AnnotatorRules {
    /// Rules embedded in the crate (`data/gazetteer.txt`,
    /// `data/emotion_lexicon.tsv`).
    pub fn embedded() -> Self {
        let mut rules = AnnotatorRules {
            gazetteer: BTreeSet::new(),
            emotion_lexicon: BTreeMap::new(),
        };
        rules
            .load_gazetteer_str(include_str!("../data/gazetteer.txt"))
            .expect("embedded gazetteer is well-formed");
        rules
            .load_lexicon_str(include_str!("../data/emotion_lexicon.tsv"))
            .expect("embedded lexicon is well-formed");
        rules
    }

    pub fn load_gazetteer_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        self.gazetteer.clear();
        self.load_gazetteer_str(&text)
    }

    pub fn load_lexicon_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        self.emotion_lexicon.clear();
        self.load_lexicon_str(&text)
    }

    fn load_gazetteer_str(&mut self, text: &str) -> Result<()> {
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            self.gazetteer.insert(line.to_lowercase());
        }
        Ok(())
    }

    fn load_lexicon_str(&mut self, text: &str) -> Result<()> {
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            let word = parts
                .next()
                .ok_or_else(|| Error::ConfigInvalid(format!("lexicon line {line:?}")))?;
            let label = parts
                .next()
                .ok_or_else(|| Error::ConfigInvalid(format!("lexicon line {line:?}")))?;
            let weight: f64 = parts
                .next()
                .ok_or_else(|| Error::ConfigInvalid(format!("lexicon line {line:?}")))?
                .parse()
                .map_err(|_| Error::ConfigInvalid(format!("lexicon weight in {line:?}")))?;
            let label = match label {
                "positive" => EmotionLabel::Positive,
                "negative" => EmotionLabel::Negative,
                "anxious" => EmotionLabel::Anxious,
                "frustrated" => EmotionLabel::Frustrated,
                "excited" => EmotionLabel::Excited,
                other => {
                    return Err(Error::ConfigInvalid(format!(
                        "unknown emotion label {other:?}"
                    )))
                }
            };
            self.emotion_lexicon
                .insert(word.to_lowercase(), (label, weight));
        }
        Ok(())
    }
}

impl Default for AnnotatorRules {
    fn default() -> Self {
        Self::embedded()
    }
}

#[derive(Debug, Clone)]
struct Token {
    /// Lowercased, stripped of surrounding punctuation; possessive 's removed.
    clean: String,
    /// First character of the raw token is uppercase.
    capitalized: bool,
    /// Token ends the sentence (trailing . ! ?).
    sentence_end: bool,
}

fn tokenize(utterance: &str) -> Vec<Token> {
    utterance
        .split_whitespace()
        .map(|raw| {
            let capitalized = raw
                .chars()
                .next()
                .map(|c| c.is_uppercase())
                .unwrap_or(false);
            let sentence_end = raw.ends_with(['.', '!', '?']);
            let stripped: &str = raw.trim_matches(|c: char| !c.is_alphanumeric() && c != '-');
            let mut clean = stripped.to_lowercase();
            if let Some(base) = clean.strip_suffix("'s") {
                clean = base.to_string();
            }
            Token {
                clean,
                capitalized,
                sentence_end,
            }
        })
        .filter(|t| !t.clean.is_empty())
        .collect()
}

fn is_stopword(word: &str) -> bool {
    STOPWORDS.contains(&word)
}

fn is_quantity(word: &str) -> bool {
    word.chars()
        .next()
        .map(|c| c.is_ascii_digit())
        .unwrap_or(false)
}

fn verb_entry(word: &str) -> Option<(&'static str, bool)> {
    if COPULAS.contains(&word) {
        let past = word == "was" || word == "were";
        return Some(("be", past));
    }
    VERBS
        .iter()
        .find(|(surface, _, _)| *surface == word)
        .map(|(_, lemma, past)| (*lemma, *past))
}

/// The deterministic rule-based annotator.
#[derive(Debug, Clone, Default)]
pub struct Annotator {
    rules: AnnotatorRules,
}

impl Annotator {
    pub fn new(rules: AnnotatorRules) -> Self {
        Annotator { rules }
    }

    /// Classify the dialogue role of an utterance.
    pub fn role(&self, utterance: &str) -> UtteranceRole {
        let trimmed = utterance.trim();
        let tokens = tokenize(trimmed);
        if trimmed.ends_with('?') {
            return UtteranceRole::Question;
        }
        if let Some(first) = tokens.first() {
            if INTERROGATIVES.contains(&first.clean.as_str())
                || QUESTION_LEADS.contains(&first.clean.as_str())
            {
                return UtteranceRole::Question;
            }
        }
        if !tokens.is_empty() && tokens.iter().all(|t| ACK_WORDS.contains(&t.clean.as_str())) {
            return UtteranceRole::Acknowledgment;
        }
        UtteranceRole::Statement
    }

    /// Extract semantic anchors from one utterance given the prior dialogue
    /// context (most recent last). Pure function of the inputs and rule
    /// tables.
    pub fn annotate(&self, utterance: &str, context: &[String]) -> Result<SemanticAnchorSet> {
        if normalize_text(utterance).is_empty() {
            return Err(Error::EmptyUtterance);
        }
        let role = self.role(utterance);
        let tokens = tokenize(utterance);

        let mut anchors = SemanticAnchorSet::empty();
        anchors.emotion = self.classify_emotion(&tokens);

        if role == UtteranceRole::Acknowledgment {
            // Pure acknowledgments contribute no content.
            return Ok(anchors);
        }

        self.extract_entities(&tokens, &mut anchors);
        anchors.temporal_class = classify_temporal(&tokens, role);

        if role == UtteranceRole::Question {
            // Questions assert nothing; entities and emotion only.
            return Ok(anchors);
        }

        self.extract_svo(&tokens, &mut anchors);

        if anchors.facts.is_empty() {
            if let Some(question) = context
                .last()
                .filter(|c| self.role(c) == UtteranceRole::Question)
            {
                self.synthesize_answer_fact(question, utterance, &mut anchors);
            }
        }

        Ok(anchors)
    }

    /// Explicit preference, pin, and privacy markers in an utterance.
    pub fn preference_tags(&self, utterance: &str) -> BTreeSet<String> {
        let normalized = normalize_text(utterance);
        let mut tags = BTreeSet::new();
        if normalized.contains("please remember")
            || normalized.contains("don't forget")
            || normalized.contains("do not forget")
        {
            tags.insert("pinned".to_string());
        }
        if normalized.contains("private")
            || normalized.contains("between us")
            || normalized.contains("confidential")
        {
            tags.insert("private".to_string());
        }
        let tokens = tokenize(&normalized);
        for (i, tok) in tokens.iter().enumerate() {
            if matches!(
                tok.clean.as_str(),
                "prefer" | "prefers" | "like" | "likes" | "love" | "loves"
            ) {
                let phrase: Vec<&str> = tokens[i + 1..]
                    .iter()
                    .map(|t| t.clean.as_str())
                    .filter(|w| !is_stopword(w))
                    .take(3)
                    .collect();
                if !phrase.is_empty() {
                    tags.insert(phrase.join(" "));
                }
                break;
            }
            if tok.clean == "favorite" {
                // "my favorite X is Y" tags Y.
                if let Some(cop) = tokens[i..]
                    .iter()
                    .position(|t| COPULAS.contains(&t.clean.as_str()))
                {
                    let phrase: Vec<&str> = tokens[i + cop + 1..]
                        .iter()
                        .map(|t| t.clean.as_str())
                        .filter(|w| !is_stopword(w))
                        .take(3)
                        .collect();
                    if !phrase.is_empty() {
                        tags.insert(phrase.join(" "));
                    }
                }
                break;
            }
        }
        tags
    }

    fn classify_emotion(&self, tokens: &[Token]) -> EmotionTag {
        let mut sums: BTreeMap<EmotionLabel, f64> = BTreeMap::new();
        for tok in tokens {
            if let Some((label, weight)) = self.rules.emotion_lexicon.get(&tok.clean) {
                *sums.entry(*label).or_insert(0.0) += weight;
            }
        }
        // Deterministic argmax: highest sum, ties broken by label order.
        let best = [
            EmotionLabel::Positive,
            EmotionLabel::Negative,
            EmotionLabel::Anxious,
            EmotionLabel::Frustrated,
            EmotionLabel::Excited,
        ]
        .iter()
        .filter_map(|l| sums.get(l).map(|s| (*l, *s)))
        .max_by(|a, b| a.1.partial_cmp(&b.1).expect("weights are finite"));
        match best {
            Some((label, sum)) if sum > 0.0 => EmotionTag::new(label, sum.min(1.0)),
            _ => EmotionTag::neutral(),
        }
    }

    fn extract_entities(&self, tokens: &[Token], anchors: &mut SemanticAnchorSet) {
        let mut strong: Vec<String> = Vec::new();
        let mut weak: Vec<String> = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            let tok = &tokens[i];
            if is_quantity(&tok.clean) {
                strong.push(tok.clean.clone());
                i += 1;
                continue;
            }
            if tok.capitalized && !is_stopword(&tok.clean) && verb_entry(&tok.clean).is_none() {
                // Merge consecutive capitalized tokens into one span.
                let mut span = vec![tok.clean.clone()];
                let mut j = i + 1;
                while j < tokens.len()
                    && !tokens[j - 1].sentence_end
                    && tokens[j].capitalized
                    && !is_stopword(&tokens[j].clean)
                    && verb_entry(&tokens[j].clean).is_none()
                {
                    span.push(tokens[j].clean.clone());
                    j += 1;
                }
                strong.push(span.join(" "));
                i = j;
                continue;
            }
            if self.rules.gazetteer.contains(&tok.clean) {
                strong.push(tok.clean.clone());
            } else if tok.clean.len() >= 3
                && !is_stopword(&tok.clean)
                && verb_entry(&tok.clean).is_none()
                && !PREPOSITIONS.contains(&tok.clean.as_str())
                && tok.clean.chars().all(|c| c.is_alphabetic() || c == '-')
            {
                weak.push(tok.clean.clone());
            }
            i += 1;
        }
        let mut seen = BTreeSet::new();
        for s in strong {
            if seen.insert(s.clone()) {
                anchors.entities.push(Entity {
                    surface: s,
                    kind: EntityKind::Strong,
                });
            }
        }
        for w in weak {
            if seen.insert(w.clone()) {
                anchors.entities.push(Entity {
                    surface: w,
                    kind: EntityKind::Weak,
                });
            }
        }
    }

    fn extract_svo(&self, tokens: &[Token], anchors: &mut SemanticAnchorSet) {
        // First clause only: up to the first sentence end.
        let clause_end = tokens
            .iter()
            .position(|t| t.sentence_end)
            .map(|i| i + 1)
            .unwrap_or(tokens.len());
        let clause = &tokens[..clause_end];
        // The copula wins over other verb candidates ("the favorite drink
        // is coffee" pivots on "is", not "drink").
        let copula_pos = clause
            .iter()
            .position(|t| COPULAS.contains(&t.clean.as_str()))
            .filter(|p| *p > 0);
        let verb_pos = match copula_pos
            .or_else(|| clause.iter().position(|t| verb_entry(&t.clean).is_some()))
        {
            Some(p) if p > 0 => p,
            _ => return,
        };
        let (lemma, _) = verb_entry(&clause[verb_pos].clean).expect("position found above");

        let subject = content_phrase(&clause[..verb_pos]);
        if subject.is_empty() {
            return;
        }

        let after = &clause[verb_pos + 1..];
        if after.is_empty() {
            return;
        }

        let (label, object) = if lemma != "be" && PREPOSITIONS.contains(&after[0].clean.as_str()) {
            let object = content_phrase(&after[1..]);
            (format!("{}_{}", lemma, after[0].clean), object)
        } else {
            let object = raw_phrase(after);
            (lemma.to_string(), object)
        };
        if object.is_empty() {
            return;
        }

        let key = if label == "be" {
            subject.clone()
        } else {
            format!("{subject} {label}")
        };
        anchors.facts.push(Fact {
            key,
            value: object.clone(),
        });
        anchors.triples.push(Triple {
            subject: subject.clone(),
            predicate: label.clone(),
            object: object.clone(),
        });
        anchors.relations.push(Relation {
            head: subject.clone(),
            label: if label == "be" {
                "is".to_string()
            } else {
                label
            },
            tail: object.clone(),
        });
        ensure_entity(anchors, &subject);
        ensure_entity(anchors, &object);
    }

    /// Build a fact for an answer utterance from the preceding question's
    /// topic, when the answer itself carries no extractable clause
    /// ("What is the after-sales service period?" → "7-day return...").
    fn synthesize_answer_fact(
        &self,
        question: &str,
        answer: &str,
        anchors: &mut SemanticAnchorSet,
    ) {
        let Some(topic) = question_topic(question) else {
            return;
        };
        let value = normalize_text(answer)
            .trim_end_matches(['.', '!', '?'])
            .to_string();
        if value.is_empty() {
            return;
        }
        anchors.facts.push(Fact {
            key: topic.clone(),
            value: value.clone(),
        });
        anchors.triples.push(Triple {
            subject: topic.clone(),
            predicate: "is".to_string(),
            object: value.clone(),
        });
        anchors.relations.push(Relation {
            head: topic.clone(),
            label: "is".to_string(),
            tail: value.clone(),
        });
        ensure_entity(anchors, &topic);
        ensure_entity(anchors, &value);
    }
}

/// Content tokens joined: stopwords dropped, first-person subjects mapped to
/// "user".
fn content_phrase(tokens: &[Token]) -> String {
    let words: Vec<&str> = tokens
        .iter()
        .map(|t| t.clean.as_str())
        .filter(|w| !is_stopword(w))
        .collect();
    if words.is_empty() {
        let first_person = tokens
            .iter()
            .any(|t| matches!(t.clean.as_str(), "i" | "my" | "me" | "we" | "our"));
        if first_person {
            return "user".to_string();
        }
        return String::new();
    }
    words.join(" ")
}

/// Tokens joined verbatim apart from articles, with trailing filler
/// stopwords stripped, for complements like "1-year free" or
/// "every tuesday".
fn raw_phrase(tokens: &[Token]) -> String {
    let mut words: Vec<&str> = tokens
        .iter()
        .map(|t| t.clean.as_str())
        .filter(|w| !matches!(*w, "the" | "a" | "an"))
        .collect();
    while words.last().map(|w| is_stopword(w)).unwrap_or(false) {
        words.pop();
    }
    words.join(" ")
}

fn ensure_entity(anchors: &mut SemanticAnchorSet, surface: &str) {
    if !anchors.entities.iter().any(|e| e.surface == surface) {
        anchors.entities.push(Entity {
            surface: surface.to_string(),
            kind: EntityKind::Weak,
        });
    }
}

fn classify_temporal(tokens: &[Token], role: UtteranceRole) -> TemporalClass {
    let words: Vec<&str> = tokens.iter().map(|t| t.clean.as_str()).collect();
    if words.iter().any(|w| RECURRING_MARKERS.contains(w)) {
        return TemporalClass::Recurring;
    }
    if words.iter().any(|w| FUTURE_MARKERS.contains(w)) {
        return TemporalClass::Future;
    }
    if words.iter().any(|w| PAST_MARKERS.contains(w))
        || words
            .iter()
            .any(|w| verb_entry(w).map(|(_, past)| past).unwrap_or(false))
    {
        return TemporalClass::Past;
    }
    if role != UtteranceRole::Question && words.iter().any(|w| verb_entry(w).is_some()) {
        return TemporalClass::Present;
    }
    TemporalClass::Atemporal
}

/// Topic of a question: the content span after the interrogative, stopping
/// at "for"/"of"/"about". "What is the after-sales service period for this
/// product?" → "after-sales service period".
fn question_topic(question: &str) -> Option<String> {
    let tokens = tokenize(question);
    let start = tokens
        .iter()
        .position(|t| INTERROGATIVES.contains(&t.clean.as_str()))
        .map(|i| i + 1)
        .unwrap_or(0);
    let mut topic: Vec<&str> = Vec::new();
    for tok in &tokens[start..] {
        let w = tok.clean.as_str();
        if matches!(w, "for" | "of" | "about") && !topic.is_empty() {
            break;
        }
        if COPULAS.contains(&w)
            || QUESTION_LEADS.contains(&w)
            || is_stopword(w)
            || matches!(w, "long" | "much" | "many" | "for" | "of" | "about")
        {
            continue;
        }
        topic.push(w);
        if topic.len() == 4 {
            break;
        }
    }
    if topic.is_empty() {
        None
    } else {
        Some(topic.join(" "))
    }
}

/// Wire request for an external annotator backend. The response mirrors
/// [`SemanticAnchorSet`] as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterRequest {
    pub utterance: String,
    pub context: Vec<String>,
}

/// An external annotation backend (an LLM service, typically). Must return
/// the same shape the rule-based annotator produces.
pub trait AnnotatorBackend: Send + Sync {
    fn annotate(&self, request: &AdapterRequest) -> Result<SemanticAnchorSet>;
}

/// Wraps a backend with fall-back to the deterministic rules: any backend
/// error (including a timeout surfaced by the transport) falls through to
/// the default annotator, so ingestion never blocks on the adapter.
pub struct AdapterAnnotator<B> {
    backend: B,
    fallback: Annotator,
}

impl<B: AnnotatorBackend> AdapterAnnotator<B> {
    pub fn new(backend: B, fallback: Annotator) -> Self {
        AdapterAnnotator { backend, fallback }
    }

    pub fn annotate(&self, utterance: &str, context: &[String]) -> Result<SemanticAnchorSet> {
        let request = AdapterRequest {
            utterance: utterance.to_string(),
            context: context.to_vec(),
        };
        match self.backend.annotate(&request) {
            Ok(anchors) => Ok(anchors),
            Err(_) => self.fallback.annotate(utterance, context),
        }
    }
}

impl<F> AnnotatorBackend for F
where
    F: Fn(&AdapterRequest) -> Result<SemanticAnchorSet> + Send + Sync,
{
    fn annotate(&self, request: &AdapterRequest) -> Result<SemanticAnchorSet> {
        self(request)
    }
}

/// Turn anchors into memory units: one unit per distinct fact, content
/// normalized, in-batch duplicates collapsed. Acknowledgment-only anchor
/// sets (zero facts) produce zero units; the ingest pipeline decides whether
/// to keep a verbatim record instead. Unit ids are assigned at upsert.
pub fn generate_units(
    anchors: &SemanticAnchorSet,
    raw: &str,
    utterance_ref: &str,
    now: Timestamp,
    space_id: &str,
    preference_tags: &BTreeSet<String>,
    embedder: &dyn EmbeddingProvider,
) -> Result<Vec<MemoryUnit>> {
    let content = normalize_text(raw);
    let mut units = Vec::new();
    let mut seen: BTreeSet<(String, String, String)> = BTreeSet::new();
    for fact in &anchors.facts {
        if !seen.insert((content.clone(), fact.key.clone(), fact.value.clone())) {
            continue;
        }
        units.push(MemoryUnit {
            id: UnitId(0),
            space_id: space_id.to_string(),
            content: content.clone(),
            fact: Some(fact.clone()),
            anchors: anchors.clone(),
            embedding: embedder.embed(&content)?,
            created_at: now,
            trace: ActivationTrace::new(now),
            emotion_weight: anchors.emotion.intensity,
            preference_tags: preference_tags.clone(),
            state: LifecycleState::Active,
            provenance: vec![utterance_ref.to_string()],
            superseded_by: None,
            merged_into: None,
        });
    }
    Ok(units)
}

/// A fact-less unit recording the utterance verbatim (questions,
/// acknowledgments, chit-chat). These are the units semantic pruning later
/// discards as irrelevant.
pub fn verbatim_unit(
    anchors: &SemanticAnchorSet,
    raw: &str,
    utterance_ref: &str,
    now: Timestamp,
    space_id: &str,
    preference_tags: &BTreeSet<String>,
    embedder: &dyn EmbeddingProvider,
) -> Result<MemoryUnit> {
    let content = normalize_text(raw);
    if content.is_empty() {
        return Err(Error::EmptyUtterance);
    }
    Ok(MemoryUnit {
        id: UnitId(0),
        space_id: space_id.to_string(),
        content: content.clone(),
        fact: None,
        anchors: anchors.clone(),
        embedding: embedder.embed(&content)?,
        created_at: now,
        trace: ActivationTrace::new(now),
        emotion_weight: anchors.emotion.intensity,
        preference_tags: preference_tags.clone(),
        state: LifecycleState::Active,
        provenance: vec![utterance_ref.to_string()],
        superseded_by: None,
        merged_into: None,
    })
}
