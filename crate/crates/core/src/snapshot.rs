//! Snapshot persistence: a versioned JSON-lines record log plus a manifest
//! with a checksum.
//!
//! Layout under the snapshot directory:
//!
//! ```text
//! manifest.json    {"format_version": 1, "record_count": N, "sha256": "..."}
//! records.jsonl    one record per space header / unit / node / edge /
//!                  utterance / agent, canonically sorted
//! ```
//!
//! `load(snapshot(engine))` is observationally equal to the original engine:
//! every query agrees. Truncation or bit rot fails the checksum
//! (`CorruptSnapshot`); unknown format versions are rejected
//! (`VersionUnsupported`).

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::graphstore::{GraphEdge, GraphNode, Space, SpaceHeader, UtteranceRecord};
use crate::hub::{AgentProfile, Hub};
use crate::types::MemoryUnit;

pub const FORMAT_VERSION: u32 = 1;

const MANIFEST_FILE: &str = "manifest.json";
const RECORDS_FILE: &str = "records.jsonl";

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    record_count: usize,
    sha256: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "snake_case")]
enum Record {
    Space {
        header: Box<SpaceHeader>,
    },
    Unit {
        space: String,
        data: Box<MemoryUnit>,
    },
    Node {
        space: String,
        data: Box<GraphNode>,
    },
    Edge {
        space: String,
        data: Box<GraphEdge>,
    },
    Utterance {
        space: String,
        data: Box<UtteranceRecord>,
    },
    Agent {
        data: Box<AgentProfile>,
    },
}

/// Serialize the engine's stores (all spaces plus the agent registry) into
/// `dir`, overwriting any previous snapshot there.
pub fn snapshot(engine: &Engine, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut lines: Vec<String> = Vec::new();
    for (id, space) in engine.spaces() {
        lines.push(serde_json::to_string(&Record::Space {
            header: Box::new(space.header()),
        })?);
        for unit in space.units() {
            lines.push(serde_json::to_string(&Record::Unit {
                space: id.clone(),
                data: Box::new(unit.clone()),
            })?);
        }
        for node in space.nodes() {
            lines.push(serde_json::to_string(&Record::Node {
                space: id.clone(),
                data: Box::new(node.clone()),
            })?);
        }
        for edge in space.edges() {
            lines.push(serde_json::to_string(&Record::Edge {
                space: id.clone(),
                data: Box::new(edge.clone()),
            })?);
        }
        for utt in space.utterances() {
            lines.push(serde_json::to_string(&Record::Utterance {
                space: id.clone(),
                data: Box::new(utt.clone()),
            })?);
        }
    }
    for agent in engine.hub().agents() {
        lines.push(serde_json::to_string(&Record::Agent {
            data: Box::new(agent.clone()),
        })?);
    }

    let mut body = String::new();
    for line in &lines {
        body.push_str(line);
        body.push('\n');
    }
    let mut hasher = Sha256::new();
    hasher.update(body.as_bytes());
    let sha256: String = hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();

    let mut records = fs::File::create(dir.join(RECORDS_FILE))?;
    records.write_all(body.as_bytes())?;
    records.sync_all()?;
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        record_count: lines.len(),
        sha256,
    };
    fs::write(
        dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

/// Load a snapshot into the engine, replacing all spaces and the agent
/// registry.
pub fn load(engine: &mut Engine, dir: &Path) -> Result<()> {
    let manifest_text = fs::read_to_string(dir.join(MANIFEST_FILE))
        .map_err(|e| Error::CorruptSnapshot(format!("manifest unreadable: {e}")))?;
    let manifest: Manifest = serde_json::from_str(&manifest_text)
        .map_err(|e| Error::CorruptSnapshot(format!("manifest malformed: {e}")))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::VersionUnsupported(manifest.format_version));
    }

    let body = fs::read(dir.join(RECORDS_FILE))
        .map_err(|e| Error::CorruptSnapshot(format!("records unreadable: {e}")))?;
    let mut hasher = Sha256::new();
    hasher.update(&body);
    let sha256: String = hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    if sha256 != manifest.sha256 {
        return Err(Error::CorruptSnapshot(format!(
            "checksum mismatch: manifest {}, computed {}",
            manifest.sha256, sha256
        )));
    }

    let reader = BufReader::new(&body[..]);
    let mut headers: BTreeMap<String, SpaceHeader> = BTreeMap::new();
    let mut units: BTreeMap<String, Vec<MemoryUnit>> = BTreeMap::new();
    let mut nodes: BTreeMap<String, Vec<GraphNode>> = BTreeMap::new();
    let mut edges: BTreeMap<String, Vec<GraphEdge>> = BTreeMap::new();
    let mut utterances: BTreeMap<String, Vec<UtteranceRecord>> = BTreeMap::new();
    let mut hub = Hub::new();
    let mut record_count = 0usize;
    for line in reader.lines() {
        let line = line.map_err(|e| Error::CorruptSnapshot(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        record_count += 1;
        let record: Record = serde_json::from_str(&line)
            .map_err(|e| Error::CorruptSnapshot(format!("record {record_count}: {e}")))?;
        match record {
            Record::Space { header } => {
                headers.insert(header.id.clone(), *header);
            }
            Record::Unit { space, data } => units.entry(space).or_default().push(*data),
            Record::Node { space, data } => nodes.entry(space).or_default().push(*data),
            Record::Edge { space, data } => edges.entry(space).or_default().push(*data),
            Record::Utterance { space, data } => utterances.entry(space).or_default().push(*data),
            Record::Agent { data } => {
                hub.register_agent(*data)
                    .map_err(|e| Error::CorruptSnapshot(format!("agent record: {e}")))?;
            }
        }
    }
    if record_count != manifest.record_count {
        return Err(Error::CorruptSnapshot(format!(
            "record count mismatch: manifest {}, found {record_count}",
            manifest.record_count
        )));
    }

    let mut spaces: BTreeMap<String, Space> = BTreeMap::new();
    for (id, header) in headers {
        let space = Space::assemble(
            header,
            units.remove(&id).unwrap_or_default(),
            nodes.remove(&id).unwrap_or_default(),
            edges.remove(&id).unwrap_or_default(),
            utterances.remove(&id).unwrap_or_default(),
        )?;
        spaces.insert(id, space);
    }
    if let Some(orphan) = units.keys().chain(nodes.keys()).chain(edges.keys()).next() {
        return Err(Error::CorruptSnapshot(format!(
            "records reference unknown space {orphan:?}"
        )));
    }
    engine.restore_state(spaces, hub);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Timestamp;
    use std::collections::BTreeSet;

    #[test]
    fn empty_engine_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let engine = Engine::with_defaults();
        snapshot(&engine, dir.path()).unwrap();
        let mut restored = Engine::with_defaults();
        load(&mut restored, dir.path()).unwrap();
        assert_eq!(restored.space_ids().count(), 0);
    }

    #[test]
    fn populated_engine_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let mut engine = Engine::with_defaults();
        engine
            .ingest("s", "Milo lives in Paris.", "user", Timestamp(100))
            .unwrap();
        engine
            .ingest("s", "Okay, I understand.", "user", Timestamp(160))
            .unwrap();
        engine
            .ingest("s", "Rena works at Zephyr.", "user", Timestamp(220))
            .unwrap();
        engine
            .query("s", "milo", 2, &BTreeSet::new(), Timestamp(300))
            .unwrap();

        snapshot(&engine, dir.path()).unwrap();
        let mut restored = Engine::with_defaults();
        load(&mut restored, dir.path()).unwrap();

        let q = |e: &Engine| {
            e.score(
                "s",
                "where does milo live",
                3,
                &BTreeSet::new(),
                Timestamp(400),
            )
            .unwrap()
            .iter()
            .map(|h| (h.unit_id, h.content.clone()))
            .collect::<Vec<_>>()
        };
        assert_eq!(q(&engine), q(&restored));
        assert_eq!(
            engine.stats("s").unwrap().full_history_tokens,
            restored.stats("s").unwrap().full_history_tokens
        );
    }

    #[test]
    fn truncated_records_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut engine = Engine::with_defaults();
        engine
            .ingest("s", "Milo lives in Paris.", "user", Timestamp(100))
            .unwrap();
        snapshot(&engine, dir.path()).unwrap();

        let path = dir.path().join(RECORDS_FILE);
        let body = fs::read_to_string(&path).unwrap();
        fs::write(&path, &body[..body.len() / 2]).unwrap();
        let mut restored = Engine::with_defaults();
        assert!(matches!(
            load(&mut restored, dir.path()),
            Err(Error::CorruptSnapshot(_))
        ));
    }

    #[test]
    fn unsupported_version_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let engine = Engine::with_defaults();
        snapshot(&engine, dir.path()).unwrap();
        let path = dir.path().join(MANIFEST_FILE);
        let manifest = fs::read_to_string(&path).unwrap();
        fs::write(
            &path,
            manifest.replace("\"format_version\": 1", "\"format_version\": 9"),
        )
        .unwrap();
        let mut restored = Engine::with_defaults();
        assert!(matches!(
            load(&mut restored, dir.path()),
            Err(Error::VersionUnsupported(9))
        ));
    }
}
