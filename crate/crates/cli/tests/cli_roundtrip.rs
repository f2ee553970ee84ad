//! CLI integration: gen-corpus contract, ingest → query flow, import/export
//! byte stability, and purge confirmation.

use std::path::Path;
use std::process::Command;

fn mnemon() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mnemon"))
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().expect("command runs");
    assert!(
        out.status.success(),
        "command failed: {}\n{}",
        String::from_utf8_lossy(&out.stderr),
        String::from_utf8_lossy(&out.stdout)
    );
    String::from_utf8(out.stdout).expect("utf8 stdout")
}

#[test]
fn gen_corpus_contract_and_ingest_query() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.jsonl");
    let probes = dir.path().join("probes.jsonl");
    let store = dir.path().join("store");

    run_ok(
        mnemon()
            .args(["gen-corpus", "--facts", "100", "--dup", "10", "--seed", "5"])
            .arg("--out")
            .arg(&corpus)
            .arg("--probes")
            .arg(&probes),
    );
    let probe_lines = std::fs::read_to_string(&probes).unwrap();
    let keys: std::collections::BTreeSet<String> = probe_lines
        .lines()
        .map(|l| {
            serde_json::from_str::<serde_json::Value>(l).unwrap()["fact_key"]
                .as_str()
                .unwrap()
                .to_string()
        })
        .collect();
    assert_eq!(keys.len(), 100, "exactly 100 distinct fact keys");

    run_ok(
        mnemon()
            .arg("--store")
            .arg(&store)
            .arg("ingest")
            .arg(&corpus)
            .args(["--space", "demo"]),
    );
    let out = run_ok(mnemon().arg("--store").arg(&store).args([
        "query",
        "--space",
        "demo",
        "--text",
        "Where does Milo live?",
        "--k",
        "1",
        "--now",
        "99999999",
    ]));
    let hits: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(hits[0]["fact"]["key"], "milo live_in");
}

#[test]
fn import_then_export_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.jsonl");
    let store = dir.path().join("store");
    run_ok(
        mnemon()
            .args(["gen-corpus", "--facts", "20", "--dup", "3", "--seed", "9"])
            .arg("--out")
            .arg(&corpus),
    );
    run_ok(
        mnemon()
            .arg("--store")
            .arg(&store)
            .arg("ingest")
            .arg(&corpus),
    );

    let exported_a = dir.path().join("a");
    let exported_b = dir.path().join("b");
    run_ok(
        mnemon()
            .arg("--store")
            .arg(&store)
            .arg("export")
            .arg(&exported_a),
    );

    // Import into a fresh store, export again: records are canonically
    // sorted, so the bytes agree.
    let store2 = dir.path().join("store2");
    run_ok(
        mnemon()
            .arg("--store")
            .arg(&store2)
            .arg("import")
            .arg(&exported_a),
    );
    run_ok(
        mnemon()
            .arg("--store")
            .arg(&store2)
            .arg("export")
            .arg(&exported_b),
    );

    let read = |dir: &Path| std::fs::read(dir.join("records.jsonl")).unwrap();
    assert_eq!(read(&exported_a), read(&exported_b));
}

#[test]
fn purge_requires_confirm_and_dry_run_never_mutates() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.jsonl");
    let store = dir.path().join("store");
    run_ok(
        mnemon()
            .args(["gen-corpus", "--facts", "5", "--dup", "2", "--seed", "4"])
            .arg("--out")
            .arg(&corpus),
    );
    run_ok(
        mnemon()
            .arg("--store")
            .arg(&store)
            .arg("ingest")
            .arg(&corpus),
    );

    let out = mnemon()
        .arg("--store")
        .arg(&store)
        .arg("purge")
        .output()
        .unwrap();
    assert!(!out.status.success(), "purge without --confirm must refuse");

    let before = std::fs::read(store.join("records.jsonl")).unwrap();
    run_ok(
        mnemon()
            .arg("--store")
            .arg(&store)
            .args(["sweep", "--dry-run", "--now", "99999999"]),
    );
    let after = std::fs::read(store.join("records.jsonl")).unwrap();
    assert_eq!(before, after, "--dry-run must not mutate the store");

    run_ok(
        mnemon()
            .arg("--store")
            .arg(&store)
            .args(["purge", "--confirm"]),
    );
}
