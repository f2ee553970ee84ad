//! Deterministic text embedding and vector math.
//!
//! The default embedder feature-hashes character trigrams of the normalized
//! text into `dim` signed buckets and L2-normalizes the result. It is a pure
//! function of the normalized text: the same input always produces the same
//! vector, on every platform. An external embedding service can replace it
//! behind [`EmbeddingProvider`]; all tests and acceptance runs use the
//! default.

use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// Default embedding dimension. Small enough for brute-force scans and
/// oracles, large enough to separate a synthetic corpus.
pub const DEFAULT_DIM: usize = 256;

/// Anything that can turn normalized text into a unit-norm vector.
pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f32>>;
}

/// The built-in trigram feature hasher.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 2, "embedding dimension must be at least 2");
        HashEmbedder { dim }
    }
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder::new(DEFAULT_DIM)
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f32>> {
        embed_hashed(text, self.dim)
    }
}

/// Normalize text for storage and deduplication: Unicode NFC, lowercase,
/// whitespace collapsed to single spaces. Idempotent.
pub fn normalize_text(text: &str) -> String {
    let composed: String = text.nfc().collect();
    let lowered = composed.to_lowercase();
    let mut out = String::with_capacity(lowered.len());
    let mut last_was_space = true; // trims leading whitespace
    for ch in lowered.chars() {
        if ch.is_whitespace() {
            if !last_was_space {
                out.push(' ');
                last_was_space = true;
            }
        } else {
            out.push(ch);
            last_was_space = false;
        }
    }
    while out.ends_with(' ') {
        out.pop();
    }
    out
}

// FNV-1a, fixed 64-bit variant. std's DefaultHasher is not stable across
// releases; embeddings must be reproducible from the repo alone.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Embed `text` by signed feature hashing of character trigrams, then
/// L2-normalize. Inputs shorter than three characters hash as one gram.
pub fn embed_hashed(text: &str, dim: usize) -> Result<Vec<f32>> {
    let normalized = normalize_text(text);
    if normalized.is_empty() {
        return Err(Error::EmptyText);
    }
    let chars: Vec<char> = normalized.chars().collect();
    let mut acc = vec![0.0f64; dim];
    let mut gram = String::with_capacity(12);
    let add = |gram: &str, acc: &mut [f64]| {
        let h = fnv1a(gram.as_bytes());
        let bucket = (h % dim as u64) as usize;
        let sign = if h & (1 << 63) == 0 { 1.0 } else { -1.0 };
        acc[bucket] += sign;
    };
    if chars.len() < 3 {
        add(&normalized, &mut acc);
    } else {
        for window in chars.windows(3) {
            gram.clear();
            gram.extend(window.iter());
            add(&gram, &mut acc);
        }
    }
    let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        // All grams cancelled; fall back to a single whole-string gram so
        // the output stays unit-norm.
        acc.iter_mut().for_each(|x| *x = 0.0);
        add(&normalized, &mut acc);
    }
    let norm = acc.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(acc.iter().map(|x| (x / norm) as f32).collect())
}

/// Cosine similarity of two equal-dimension vectors, accumulated in f64.
pub fn cosine(a: &[f32], b: &[f32]) -> Result<f64> {
    let na = squared_norm(a);
    cosine_with_query_norm(a, na, b)
}

/// Squared L2 norm, accumulated in f64.
pub fn squared_norm(v: &[f32]) -> f64 {
    v.iter()
        .map(|x| {
            let x = *x as f64;
            x * x
        })
        .sum()
}

/// Cosine against a fixed query whose squared norm is precomputed once.
/// Bitwise identical to [`cosine`] on the same inputs; the retrieval scan
/// uses this to avoid recomputing the query norm per unit. Four
/// accumulator lanes keep the sums off the FP latency chain.
pub fn cosine_with_query_norm(a: &[f32], na: f64, b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let mut dot = [0.0f64; 4];
    let mut nb = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        for lane in 0..4 {
            let x = a[i * 4 + lane] as f64;
            let y = b[i * 4 + lane] as f64;
            dot[lane] += x * y;
            nb[lane] += y * y;
        }
    }
    for i in chunks * 4..a.len() {
        let x = a[i] as f64;
        let y = b[i] as f64;
        dot[0] += x * y;
        nb[0] += y * y;
    }
    let dot = (dot[0] + dot[1]) + (dot[2] + dot[3]);
    let nb = (nb[0] + nb[1]) + (nb[2] + nb[3]);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}
