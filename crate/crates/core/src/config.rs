//! Engine configuration. Every constant the underlying model leaves open —
//! decay parameters, thresholds, weights, TTLs, rule-table paths — is
//! explicit here and loadable from one TOML file.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::activation::ActivationParams;
use crate::error::{Error, Result};
use crate::retrieve::ScoreWeights;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PruningConfig {
    /// Cosine similarity at or above which two compatible units are
    /// duplicates, validated against the paraphrase similarity table.
    pub dup_threshold: f64,
    /// Node-label similarity at or above which entity nodes merge.
    pub node_merge_threshold: f64,
    /// Retention below which a contradicted unit counts as outdated;
    /// `None` follows the forget threshold.
    pub outdated_threshold: Option<f64>,
}

impl Default for PruningConfig {
    fn default() -> Self {
        PruningConfig {
            dup_threshold: 0.92,
            node_merge_threshold: 0.85,
            outdated_threshold: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ForgettingConfig {
    /// Seconds a unit stays pending-forget before the sweep retires it.
    pub grace_secs: u64,
    /// Strength at or above this keeps a weakened edge from being the
    /// ceiling; halving pushes below it.
    pub weaken_ceiling: f64,
    /// Edges weaker than this fail outright.
    pub edge_fail_strength: f64,
}

impl Default for ForgettingConfig {
    fn default() -> Self {
        ForgettingConfig {
            grace_secs: 7 * 24 * 3600,
            weaken_ceiling: 0.5,
            edge_fail_strength: 0.01,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ReflectionConfig {
    /// Conflicts closer together than this fuse instead of replacing.
    pub ambiguity_window_secs: u64,
    /// Strength added per observed traversal during logical reflection.
    pub reinforcement_delta: f64,
    /// Edge strength cap for reinforcement.
    pub strength_cap: f64,
}

impl Default for ReflectionConfig {
    fn default() -> Self {
        ReflectionConfig {
            ambiguity_window_secs: 3600,
            reinforcement_delta: 0.1,
            strength_cap: 10.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct HubConfig {
    /// Envelope time-to-live in seconds.
    pub envelope_ttl_secs: u64,
}

impl Default for HubConfig {
    fn default() -> Self {
        HubConfig {
            envelope_ttl_secs: 24 * 3600,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub port: u16,
    /// Default k for query endpoints when the request omits it.
    pub default_k: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            port: 8787,
            default_k: 5,
        }
    }
}

/// Top-level engine configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    /// Embedding dimension.
    pub dim: usize,
    pub activation: ActivationParams,
    pub scoring: ScoreWeights,
    pub pruning: PruningConfig,
    pub forgetting: ForgettingConfig,
    pub reflection: ReflectionConfig,
    pub hub: HubConfig,
    pub service: ServiceConfig,
    /// Relation labels that admit one current tail per head; drives
    /// contradiction detection.
    pub functional_relations: BTreeSet<String>,
    /// Optional rule-table overrides; empty strings use the embedded tables.
    pub gazetteer_path: String,
    pub lexicon_path: String,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            dim: crate::embedding::DEFAULT_DIM,
            activation: ActivationParams::default(),
            scoring: ScoreWeights::default(),
            pruning: PruningConfig::default(),
            forgetting: ForgettingConfig::default(),
            reflection: ReflectionConfig::default(),
            hub: HubConfig::default(),
            service: ServiceConfig::default(),
            functional_relations: ["live_in", "work_at", "move_to", "warranty_period"]
                .into_iter()
                .map(String::from)
                .collect(),
            gazetteer_path: String::new(),
            lexicon_path: String::new(),
        }
    }
}

impl EngineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: EngineConfig =
            toml::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::ConfigInvalid(format!(
                "dim must be >= 2, got {}",
                self.dim
            )));
        }
        self.activation.validate()?;
        self.scoring.validate()?;
        if !(0.0 < self.pruning.dup_threshold && self.pruning.dup_threshold <= 1.0) {
            return Err(Error::ConfigInvalid(format!(
                "dup_threshold must be in (0, 1], got {}",
                self.pruning.dup_threshold
            )));
        }
        if !(0.0 < self.pruning.node_merge_threshold && self.pruning.node_merge_threshold <= 1.0) {
            return Err(Error::ConfigInvalid(format!(
                "node_merge_threshold must be in (0, 1], got {}",
                self.pruning.node_merge_threshold
            )));
        }
        Ok(())
    }

    pub fn outdated_threshold(&self) -> f64 {
        self.pruning
            .outdated_threshold
            .unwrap_or(self.activation.forget_threshold)
    }
}
