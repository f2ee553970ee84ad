//! HTTP service: JSON API over the engine.
//!
//! Endpoints:
//!
//! ```text
//! POST /spaces/:id/ingest    {utterance, speaker, ts}
//! POST /spaces/:id/query     {text, k?, tags?, now?}
//! POST /spaces/:id/maintain  {passes: ["prune"|"forget"|"reflect"], now?, dry_run?}
//! GET  /spaces/:id/stats
//! POST /hub/agents           AgentProfile
//! POST /hub/share            {agent, topic_tags, permissions?, now?}
//! POST /hub/apply            {envelope, target_agent, now?}
//! GET  /healthz
//! ```
//!
//! Mutations serialize through the engine write lock (single writer per
//! process; spaces are independent maps inside). Queries run under the read
//! lock and batch their access records through the writer afterwards,
//! deduplicated by (unit, timestamp).

use std::collections::BTreeSet;
use std::sync::{Arc, RwLock};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use mnemon_core::engine::{Engine, IngestOutcome, QueryHit};
use mnemon_core::forget::ForgetReport;
use mnemon_core::hub::{AgentProfile, ApplyReport, ShareEnvelope, SharePermissions};
use mnemon_core::prune::PruneReport;
use mnemon_core::reflect::ReflectionReport;
use mnemon_core::types::{Timestamp, UnitId};
use mnemon_core::Error;

pub struct AppState {
    pub engine: RwLock<Engine>,
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/spaces/:id/ingest", post(ingest))
        .route("/spaces/:id/query", post(query))
        .route("/spaces/:id/maintain", post(maintain))
        .route("/spaces/:id/stats", get(stats))
        .route("/hub/agents", post(register_agent))
        .route("/hub/share", post(share))
        .route("/hub/apply", post(apply))
        .route("/healthz", get(healthz))
        .with_state(state)
}

struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl From<Error> for ApiError {
    fn from(err: Error) -> Self {
        let (status, code) = match &err {
            Error::SpaceUnknown(_) | Error::UnknownNode(_) => (StatusCode::NOT_FOUND, "not_found"),
            Error::DuplicateAgent(_) => (StatusCode::CONFLICT, "duplicate_agent"),
            Error::PermissionDenied(_) => (StatusCode::FORBIDDEN, "permission_denied"),
            Error::Expired { .. } => (StatusCode::GONE, "expired"),
            Error::NoAgents => (StatusCode::NOT_FOUND, "no_agents"),
            Error::StaleVerdicts { .. } => (StatusCode::CONFLICT, "stale_verdicts"),
            Error::EmptySelection => (StatusCode::UNPROCESSABLE_ENTITY, "empty_selection"),
            Error::EmptyText
            | Error::EmptyUtterance
            | Error::EmptyHistory
            | Error::ClockSkew { .. }
            | Error::DimensionMismatch { .. }
            | Error::ZeroVector
            | Error::ConfigInvalid(_)
            | Error::NotSoftDeleted(_) => (StatusCode::BAD_REQUEST, "bad_request"),
            Error::CorruptSnapshot(_)
            | Error::VersionUnsupported(_)
            | Error::Io(_)
            | Error::Json(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        ApiError {
            status,
            code,
            message: err.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({"code": self.code, "message": self.message});
        (self.status, Json(body)).into_response()
    }
}

fn now_secs() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[derive(Deserialize)]
struct IngestRequest {
    utterance: String,
    #[serde(default = "default_speaker")]
    speaker: String,
    ts: Option<u64>,
}

fn default_speaker() -> String {
    "user".to_string()
}

async fn ingest(
    State(state): State<Arc<AppState>>,
    Path(space): Path<String>,
    Json(req): Json<IngestRequest>,
) -> Result<Json<IngestOutcome>, ApiError> {
    let ts = Timestamp(req.ts.unwrap_or_else(now_secs));
    let mut engine = state.engine.write().expect("engine lock");
    let outcome = engine.ingest(&space, &req.utterance, &req.speaker, ts)?;
    Ok(Json(outcome))
}

#[derive(Deserialize)]
struct QueryRequest {
    text: String,
    k: Option<usize>,
    #[serde(default)]
    tags: BTreeSet<String>,
    now: Option<u64>,
}

#[derive(Serialize)]
struct QueryResponse {
    hits: Vec<QueryHit>,
}

async fn query(
    State(state): State<Arc<AppState>>,
    Path(space): Path<String>,
    Json(req): Json<QueryRequest>,
) -> Result<Json<QueryResponse>, ApiError> {
    let now = Timestamp(req.now.unwrap_or_else(now_secs));
    let (hits, accesses) = {
        let engine = state.engine.read().expect("engine lock");
        let k = req.k.unwrap_or(engine.config().service.default_k);
        let hits = engine.score(&space, &req.text, k, &req.tags, now)?;
        let accesses: Vec<(UnitId, Timestamp)> = hits.iter().map(|h| (h.unit_id, now)).collect();
        (hits, accesses)
    };
    {
        let mut engine = state.engine.write().expect("engine lock");
        engine.apply_accesses(&space, &accesses)?;
    }
    Ok(Json(QueryResponse { hits }))
}

#[derive(Deserialize)]
struct MaintainRequest {
    passes: Vec<String>,
    now: Option<u64>,
    #[serde(default)]
    dry_run: bool,
}

#[derive(Serialize, Default)]
struct MaintainResponse {
    #[serde(skip_serializing_if = "Option::is_none")]
    prune: Option<PruneReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    forget: Option<ForgetReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reflect: Option<ReflectionReport>,
}

async fn maintain(
    State(state): State<Arc<AppState>>,
    Path(space): Path<String>,
    Json(req): Json<MaintainRequest>,
) -> Result<Json<MaintainResponse>, ApiError> {
    let now = Timestamp(req.now.unwrap_or_else(now_secs));
    let mut engine = state.engine.write().expect("engine lock");
    let mut out = MaintainResponse::default();
    for pass in &req.passes {
        match pass.as_str() {
            "prune" => out.prune = Some(engine.prune_space(&space, now)?),
            "forget" => out.forget = Some(engine.sweep_space(&space, now, req.dry_run)?),
            "reflect" => out.reflect = Some(engine.reflect_space(&space, now, &[])?),
            other => {
                return Err(ApiError {
                    status: StatusCode::BAD_REQUEST,
                    code: "bad_request",
                    message: format!("unknown maintenance pass {other:?}"),
                })
            }
        }
    }
    Ok(Json(out))
}

async fn stats(
    State(state): State<Arc<AppState>>,
    Path(space): Path<String>,
) -> Result<Json<mnemon_core::SpaceStats>, ApiError> {
    let engine = state.engine.read().expect("engine lock");
    Ok(Json(engine.stats(&space)?))
}

async fn register_agent(
    State(state): State<Arc<AppState>>,
    Json(profile): Json<AgentProfile>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let mut engine = state.engine.write().expect("engine lock");
    let agent_id = profile.agent_id.clone();
    engine.register_agent(profile)?;
    Ok(Json(json!({"registered": agent_id})))
}

#[derive(Deserialize)]
struct ShareRequest {
    agent: String,
    topic_tags: BTreeSet<String>,
    permissions: Option<SharePermissions>,
    now: Option<u64>,
}

async fn share(
    State(state): State<Arc<AppState>>,
    Json(req): Json<ShareRequest>,
) -> Result<Json<ShareEnvelope>, ApiError> {
    let now = Timestamp(req.now.unwrap_or_else(now_secs));
    let engine = state.engine.read().expect("engine lock");
    let envelope = engine.share(
        &req.agent,
        &req.topic_tags,
        req.permissions.unwrap_or(SharePermissions::Public),
        now,
    )?;
    Ok(Json(envelope))
}

#[derive(Deserialize)]
struct ApplyRequest {
    envelope: ShareEnvelope,
    target_agent: String,
    now: Option<u64>,
}

async fn apply(
    State(state): State<Arc<AppState>>,
    Json(req): Json<ApplyRequest>,
) -> Result<Json<ApplyReport>, ApiError> {
    let now = Timestamp(req.now.unwrap_or_else(now_secs));
    let mut engine = state.engine.write().expect("engine lock");
    let report = engine.apply_envelope(&req.envelope, &req.target_agent, now)?;
    Ok(Json(report))
}

async fn healthz(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    let engine = state.engine.read().expect("engine lock");
    let generations: serde_json::Map<String, serde_json::Value> = engine
        .space_ids()
        .map(|id| {
            let generation = engine.space(id).map(|s| s.generation).unwrap_or_default();
            (id.to_string(), json!(generation))
        })
        .collect();
    Json(json!({"ok": true, "generations": generations}))
}
