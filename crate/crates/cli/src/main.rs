//! `mnemon` — CLI for the deterministic long-term memory engine.
//!
//! The store lives in a snapshot directory (`--store`, default
//! `./mnemon-store`): commands load it, operate, and write it back.
//! `serve` exposes the HTTP API over the same store.

use mnemon_cli::service;

use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use mnemon_core::config::EngineConfig;
use mnemon_core::corpus::{self, CorpusParams};
use mnemon_core::engine::Engine;
use mnemon_core::reflect::FeedbackEntry;
use mnemon_core::snapshot;
use mnemon_core::types::Timestamp;

#[derive(Parser)]
#[command(
    name = "mnemon",
    version,
    about = "Long-term memory engine for conversational agents"
)]
struct Cli {
    /// Store directory (snapshot format). Created on first write.
    #[arg(long, default_value = "./mnemon-store", global = true)]
    store: PathBuf,
    /// Config file (TOML); MNEMON_CONFIG overrides, defaults otherwise.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest a JSONL file of utterances: {"utterance", "speaker", "ts"}.
    Ingest {
        file: PathBuf,
        #[arg(long, default_value = "default")]
        space: String,
    },
    /// Query a space.
    Query {
        #[arg(long, default_value = "default")]
        space: String,
        #[arg(long)]
        text: String,
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Preference tags, comma separated.
        #[arg(long, value_delimiter = ',')]
        tags: Vec<String>,
        #[arg(long)]
        now: Option<u64>,
    },
    /// Run a forgetting sweep.
    Sweep {
        #[arg(long, default_value = "default")]
        space: String,
        #[arg(long)]
        now: Option<u64>,
        /// Report without mutating the store.
        #[arg(long)]
        dry_run: bool,
    },
    /// Run a full reflection cycle (temporal, factual, logical, prune,
    /// forget).
    Reflect {
        #[arg(long, default_value = "default")]
        space: String,
        #[arg(long)]
        now: Option<u64>,
        /// JSONL feedback file: {"unit_id", "delta"}.
        #[arg(long)]
        feedback: Option<PathBuf>,
    },
    /// Run semantic pruning (classify + refine).
    Prune {
        #[arg(long, default_value = "default")]
        space: String,
        #[arg(long)]
        now: Option<u64>,
    },
    /// Write a canonical snapshot of the store to a directory.
    Export { dir: PathBuf },
    /// Replace the store with a snapshot from a directory.
    Import { dir: PathBuf },
    /// Physically remove soft-deleted units. Refuses without --confirm.
    Purge {
        #[arg(long, default_value = "default")]
        space: String,
        #[arg(long)]
        confirm: bool,
    },
    /// Generate a synthetic dialogue corpus with probe answer keys.
    GenCorpus(GenCorpusArgs),
    /// Retrieval latency and token-reduction report over a synthetic store.
    Bench {
        #[arg(long, default_value_t = 100_000)]
        units: usize,
        #[arg(long, default_value_t = 100)]
        queries: usize,
        #[arg(long, default_value_t = 5)]
        k: usize,
    },
    /// Serve the HTTP API (MNEMON_PORT overrides --port and config).
    Serve {
        #[arg(long)]
        port: Option<u16>,
    },
}

#[derive(Args)]
struct GenCorpusArgs {
    #[arg(long, default_value_t = 100)]
    facts: usize,
    #[arg(long, default_value_t = 10)]
    dup: usize,
    #[arg(long, default_value_t = 0.5)]
    ack_rate: f64,
    #[arg(long, default_value_t = 0)]
    contradictions: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Corpus JSONL output path (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Probe JSONL output path.
    #[arg(long)]
    probes: Option<PathBuf>,
}

fn load_config(cli_config: &Option<PathBuf>) -> Result<EngineConfig> {
    let path = std::env::var("MNEMON_CONFIG")
        .ok()
        .map(PathBuf::from)
        .or_else(|| cli_config.clone());
    let config = match path {
        Some(p) => EngineConfig::from_file(&p)
            .with_context(|| format!("loading config from {}", p.display()))?,
        None => EngineConfig::default(),
    };
    if config.activation.decay_out_of_bounds() {
        eprintln!(
            "warning: decay exponent d = {} is outside the typical 0.3..0.7 range",
            config.activation.d
        );
    }
    Ok(config)
}

fn load_engine(config: EngineConfig, store: &Path) -> Result<Engine> {
    let mut engine = Engine::new(config)?;
    if store.join("manifest.json").exists() {
        snapshot::load(&mut engine, store)
            .with_context(|| format!("loading store from {}", store.display()))?;
    }
    Ok(engine)
}

fn save_engine(engine: &Engine, store: &Path) -> Result<()> {
    snapshot::snapshot(engine, store)
        .with_context(|| format!("writing store to {}", store.display()))
}

fn wall_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[derive(Deserialize)]
struct IngestLine {
    utterance: String,
    #[serde(default)]
    speaker: Option<String>,
    #[serde(default)]
    ts: Option<u64>,
}

fn main() {
    // Die quietly when a pager closes the pipe.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = load_config(&cli.config)?;
    match cli.command {
        Command::Ingest { file, space } => {
            let mut engine = load_engine(config, &cli.store)?;
            let reader = std::io::BufReader::new(
                std::fs::File::open(&file)
                    .with_context(|| format!("opening {}", file.display()))?,
            );
            let mut count = 0usize;
            let mut last_ts = 0u64;
            for (lineno, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let parsed: IngestLine = serde_json::from_str(&line)
                    .with_context(|| format!("line {} of {}", lineno + 1, file.display()))?;
                let ts = parsed.ts.unwrap_or_else(|| last_ts.max(wall_now()));
                last_ts = ts;
                engine.ingest(
                    &space,
                    &parsed.utterance,
                    parsed.speaker.as_deref().unwrap_or("user"),
                    Timestamp(ts),
                )?;
                count += 1;
            }
            save_engine(&engine, &cli.store)?;
            println!("{}", json!({"ingested": count, "space": space}));
        }
        Command::Query {
            space,
            text,
            k,
            tags,
            now,
        } => {
            let mut engine = load_engine(config, &cli.store)?;
            let tag_set: BTreeSet<String> = tags.into_iter().filter(|t| !t.is_empty()).collect();
            let now = Timestamp(now.unwrap_or_else(wall_now));
            let hits = engine.query(&space, &text, k, &tag_set, now)?;
            save_engine(&engine, &cli.store)?; // retrieval updates traces
            println!("{}", serde_json::to_string_pretty(&hits)?);
        }
        Command::Sweep {
            space,
            now,
            dry_run,
        } => {
            let mut engine = load_engine(config, &cli.store)?;
            let now = Timestamp(now.unwrap_or_else(wall_now));
            let report = engine.sweep_space(&space, now, dry_run)?;
            if !dry_run {
                save_engine(&engine, &cli.store)?;
            }
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Reflect {
            space,
            now,
            feedback,
        } => {
            let mut engine = load_engine(config, &cli.store)?;
            let now = Timestamp(now.unwrap_or_else(wall_now));
            let entries = match feedback {
                Some(path) => read_feedback(&path)?,
                None => Vec::new(),
            };
            let report = engine.reflect_space(&space, now, &entries)?;
            save_engine(&engine, &cli.store)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Prune { space, now } => {
            let mut engine = load_engine(config, &cli.store)?;
            let now = Timestamp(now.unwrap_or_else(wall_now));
            let report = engine.prune_space(&space, now)?;
            save_engine(&engine, &cli.store)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Export { dir } => {
            let engine = load_engine(config, &cli.store)?;
            snapshot::snapshot(&engine, &dir)?;
            println!("{}", json!({"exported_to": dir}));
        }
        Command::Import { dir } => {
            let mut engine = Engine::new(config)?;
            snapshot::load(&mut engine, &dir)
                .with_context(|| format!("importing from {}", dir.display()))?;
            save_engine(&engine, &cli.store)?;
            println!("{}", json!({"imported_from": dir}));
        }
        Command::Purge { space, confirm } => {
            if !confirm {
                bail!("purge permanently deletes soft-deleted units; pass --confirm to proceed");
            }
            let mut engine = load_engine(config, &cli.store)?;
            let purged = engine.purge_space(&space)?;
            save_engine(&engine, &cli.store)?;
            println!("{}", json!({"purged_units": purged.len()}));
        }
        Command::GenCorpus(args) => {
            let corpus = corpus::generate(&CorpusParams {
                facts: args.facts,
                dup: args.dup,
                ack_rate: args.ack_rate,
                contradictions: args.contradictions,
                seed: args.seed,
                ..CorpusParams::default()
            });
            write_jsonl(args.out.as_deref(), corpus.utterances.iter())?;
            if let Some(path) = args.probes.as_deref() {
                write_jsonl(Some(path), corpus.probes.iter())?;
            }
            eprintln!(
                "{}",
                json!({
                    "facts": corpus.fact_keys.len(),
                    "utterances": corpus.utterances.len(),
                    "tokens": corpus.total_tokens(),
                })
            );
        }
        Command::Bench { units, queries, k } => {
            let report = run_bench(config, units, queries, k)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Serve { port } => {
            let port = std::env::var("MNEMON_PORT")
                .ok()
                .and_then(|p| p.parse().ok())
                .or(port)
                .unwrap_or(config.service.port);
            serve(config, &cli.store, port)?;
        }
    }
    Ok(())
}

fn read_feedback(path: &Path) -> Result<Vec<FeedbackEntry>> {
    let reader = std::io::BufReader::new(
        std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?,
    );
    let mut entries = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        entries.push(serde_json::from_str(&line)?);
    }
    Ok(entries)
}

fn write_jsonl<'a, T: serde::Serialize + 'a>(
    path: Option<&Path>,
    items: impl Iterator<Item = &'a T>,
) -> Result<()> {
    let mut out: Box<dyn Write> = match path {
        Some(p) => Box::new(std::fs::File::create(p)?),
        None => Box::new(std::io::stdout().lock()),
    };
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn run_bench(
    config: EngineConfig,
    units: usize,
    queries: usize,
    k: usize,
) -> Result<serde_json::Value> {
    let mut engine = Engine::new(config)?;
    let corpus = corpus::generate(&CorpusParams {
        facts: units,
        dup: 1,
        ack_rate: 0.0,
        contradictions: 0,
        seed: 42,
        ..CorpusParams::default()
    });
    let build_start = Instant::now();
    engine.ingest_corpus("bench", &corpus)?;
    let build_secs = build_start.elapsed().as_secs_f64();

    let now = Timestamp(corpus.utterances.last().map(|u| u.ts + 60).unwrap_or(60));
    let tags = BTreeSet::new();
    let mut latencies_ms: Vec<f64> = Vec::with_capacity(queries);
    let mut tokens_retrieved = 0usize;
    for probe in corpus.probes.iter().cycle().take(queries) {
        let start = Instant::now();
        let hits = engine.query("bench", &probe.question, k, &tags, now)?;
        latencies_ms.push(start.elapsed().as_secs_f64() * 1000.0);
        tokens_retrieved += hits
            .iter()
            .map(|h| h.content.split_whitespace().count())
            .sum::<usize>();
    }
    latencies_ms.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let pct = |p: f64| -> f64 {
        if latencies_ms.is_empty() {
            return 0.0;
        }
        let idx = ((latencies_ms.len() as f64 - 1.0) * p).round() as usize;
        latencies_ms[idx]
    };
    let full_history = engine.stats("bench")?.full_history_tokens;
    let avg_retrieved = tokens_retrieved as f64 / queries.max(1) as f64;
    Ok(json!({
        "units": units,
        "queries": queries,
        "k": k,
        "build_secs": build_secs,
        "latency_ms": {"p50": pct(0.50), "p95": pct(0.95), "max": pct(1.0)},
        "tokens": {
            "full_history": full_history,
            "avg_retrieved_per_query": avg_retrieved,
            "retrieved_ratio": avg_retrieved / full_history.max(1) as f64,
        },
    }))
}

fn serve(config: EngineConfig, store: &Path, port: u16) -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();
    let engine = load_engine(config, store)?;
    let state = Arc::new(service::AppState {
        engine: RwLock::new(engine),
    });
    let store = store.to_path_buf();
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let app = service::router(state.clone());
        let listener = tokio::net::TcpListener::bind(("0.0.0.0", port))
            .await
            .with_context(|| format!("binding port {port}"))?;
        tracing::info!("listening on {}", listener.local_addr()?);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        // Persist on graceful shutdown.
        let engine = state.engine.read().expect("engine lock");
        snapshot::snapshot(&engine, &store)?;
        tracing::info!("store saved to {}", store.display());
        Ok(())
    })
}
