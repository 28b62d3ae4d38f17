//! HTTP API over sessions and narrative-graph analyses.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Component, Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use dejaboom_core::gateway::ProviderError;
use dejaboom_core::narrative::{
    analyze, to_json, DistillError, EmergenceReport, GraphError, MergeError, NarrativeGraph, PlayerLogs,
};
use dejaboom_core::session::{read_jsonl, SessionStore, StepError, StoreError};
use dejaboom_core::{GameRuntime, Gateway, LogRecord, PlayerMetadata, Provider, Session, SessionStatus, WorldSpec};
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};
use tokio::sync::Mutex as AsyncMutex;

use crate::config::{BusyPolicy, ConfigError, ServerConfig, ServiceConfig, DEFAULT_PROVIDER, DEFAULT_WORLD};

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    retry_after: Option<u64>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            retry_after: None,
        }
    }

    fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("no {what} `{id}`"))
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
    }

    fn retry(mut self, secs: u64) -> Self {
        self.retry_after = Some(secs);
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({"error": {"code": self.code, "message": self.message}});
        let mut res = (self.status, Json(body)).into_response();
        if let Some(secs) = self.retry_after {
            res.headers_mut().insert(header::RETRY_AFTER, HeaderValue::from(secs));
        }
        res
    }
}

type ApiResult<T> = Result<T, ApiError>;

struct Slot {
    world: String,
    provider: String,
    runtime: Arc<GameRuntime>,
    session: Arc<AsyncMutex<Session>>,
}

#[derive(Serialize, Deserialize)]
struct SlotMeta {
    world: String,
    provider: String,
}

#[derive(Serialize, Deserialize)]
struct StoredAnalysis {
    graph_id: String,
    designer: NarrativeGraph,
    merged: NarrativeGraph,
    report: EmergenceReport,
}

pub struct AppState {
    server: ServerConfig,
    worlds: BTreeMap<String, Arc<WorldSpec>>,
    providers: BTreeMap<String, Arc<dyn Provider>>,
    runtimes: BTreeMap<(String, String), Arc<GameRuntime>>,
    store: SessionStore,
    sessions: Mutex<HashMap<String, Arc<Slot>>>,
    analyses: RwLock<HashMap<String, Arc<StoredAnalysis>>>,
}

impl AppState {
    pub fn new(config: &ServiceConfig, env: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let worlds = config.load_worlds()?;
        let providers = config.build_providers(env)?;
        Self::with_parts(config.server.clone(), worlds, providers)
    }

    pub fn with_parts(
        server: ServerConfig,
        worlds: BTreeMap<String, Arc<WorldSpec>>,
        providers: BTreeMap<String, Arc<dyn Provider>>,
    ) -> Result<Self, ConfigError> {
        let io = |path: &Path, e: std::io::Error| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        };
        let sessions_dir = server.data_dir.join("sessions");
        let store = SessionStore::open(&sessions_dir).map_err(|e| io(&sessions_dir, e))?;
        for sub in ["meta", "graphs"] {
            let dir = server.data_dir.join(sub);
            fs::create_dir_all(&dir).map_err(|e| io(&dir, e))?;
        }
        let mut runtimes = BTreeMap::new();
        for (w, spec) in &worlds {
            for (p, provider) in &providers {
                let rt = GameRuntime::new(spec.clone(), Gateway::new(provider.clone()));
                runtimes.insert((w.clone(), p.clone()), Arc::new(rt));
            }
        }
        Ok(Self {
            server,
            worlds,
            providers,
            runtimes,
            store,
            sessions: Mutex::new(HashMap::new()),
            analyses: RwLock::new(HashMap::new()),
        })
    }

    fn meta_path(&self, id: &str) -> PathBuf {
        self.server.data_dir.join("meta").join(format!("{id}.json"))
    }

    fn graph_path(&self, id: &str) -> PathBuf {
        self.server.data_dir.join("graphs").join(format!("{id}.json"))
    }

    /// In-memory slot for `id`, reloading a persisted session if needed.
    fn slot(&self, id: &str) -> ApiResult<Arc<Slot>> {
        if let Some(s) = self.sessions.lock().expect("session map").get(id) {
            return Ok(s.clone());
        }
        let session = match self.store.load(id) {
            Ok(s) => s,
            Err(StoreError::NotFound(_)) => return Err(ApiError::not_found("session", id)),
            Err(e) => return Err(ApiError::internal(e)),
        };
        let meta: SlotMeta = fs::read_to_string(self.meta_path(id))
            .ok()
            .and_then(|t| serde_json::from_str(&t).ok())
            .unwrap_or(SlotMeta {
                world: DEFAULT_WORLD.into(),
                provider: DEFAULT_PROVIDER.into(),
            });
        let runtime = self
            .runtimes
            .get(&(meta.world.clone(), meta.provider.clone()))
            .cloned()
            .ok_or_else(|| ApiError::internal(format!("session `{id}` uses an unconfigured world or provider")))?;
        let slot = Arc::new(Slot {
            world: meta.world,
            provider: meta.provider,
            runtime,
            session: Arc::new(AsyncMutex::new(session)),
        });
        let mut map = self.sessions.lock().expect("session map");
        Ok(map.entry(id.to_string()).or_insert(slot).clone())
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/commands", post(post_command))
        .route("/sessions/{id}/log", get(get_log))
        .route("/analysis/graphs", post(create_graph))
        .route("/analysis/graphs/{id}", get(get_graph))
        .route("/analysis/graphs/{id}/emergence", get(get_emergence))
        .with_state(state)
}

fn raw(records: &[LogRecord]) -> Vec<Box<RawValue>> {
    // each record keeps the exact bytes of its log line
    records
        .iter()
        .map(|r| RawValue::from_string(r.to_json_line()).expect("record line is JSON"))
        .collect()
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct CreateSession {
    world: Option<String>,
    provider: Option<String>,
    player: Option<PlayerMetadata>,
}

#[derive(Serialize)]
struct Created {
    session_id: String,
    records: Vec<Box<RawValue>>,
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    body: Option<Json<CreateSession>>,
) -> ApiResult<(StatusCode, Json<Created>)> {
    let req = body.map(|Json(b)| b).unwrap_or_default();
    let world = req.world.unwrap_or_else(|| DEFAULT_WORLD.into());
    let provider = req.provider.unwrap_or_else(|| DEFAULT_PROVIDER.into());
    if !state.worlds.contains_key(&world) {
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "unknown_world", format!("no world `{world}`")));
    }
    if !state.providers.contains_key(&provider) {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "unknown_provider",
            format!("no provider config `{provider}`"),
        ));
    }
    let runtime = state.runtimes[&(world.clone(), provider.clone())].clone();
    let player = req.player.unwrap_or_else(|| PlayerMetadata::new("anonymous"));
    let session = runtime.start_session(player);
    let id = session.id.clone();
    let meta = serde_json::to_string(&SlotMeta {
        world: world.clone(),
        provider: provider.clone(),
    })
    .expect("meta serializes");
    fs::write(state.meta_path(&id), meta).map_err(ApiError::internal)?;
    state.store.persist(&session).map_err(ApiError::internal)?;
    let records = raw(&session.log);
    let slot = Arc::new(Slot {
        world,
        provider,
        runtime,
        session: Arc::new(AsyncMutex::new(session)),
    });
    state.sessions.lock().expect("session map").insert(id.clone(), slot);
    Ok((StatusCode::CREATED, Json(Created { session_id: id, records })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Command {
    text: String,
}

#[derive(Serialize)]
struct StepReply {
    status: SessionStatus,
    day: u32,
    step_in_day: u32,
    records: Vec<Box<RawValue>>,
}

async fn post_command(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Json(cmd): Json<Command>,
) -> ApiResult<Json<StepReply>> {
    let slot = state.slot(&id)?;
    let guard = match state.server.busy {
        BusyPolicy::Queue => slot.session.clone().lock_owned().await,
        BusyPolicy::Reject => slot.session.clone().try_lock_owned().map_err(|_| {
            ApiError::new(StatusCode::TOO_MANY_REQUESTS, "busy", format!("session `{id}` is handling a command"))
                .retry(1)
        })?,
    };
    let runtime = slot.runtime.clone();
    let st = state.clone();
    tokio::task::spawn_blocking(move || {
        let mut session = guard;
        let records = match runtime.step(&mut session, &cmd.text) {
            Ok(r) => r,
            Err(StepError::EmptyInput) => {
                return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "empty_input", "command text is empty"))
            }
            Err(StepError::SessionOver(status)) => {
                return Err(ApiError::new(
                    StatusCode::CONFLICT,
                    "session_over",
                    format!("session is over ({status:?})"),
                ))
            }
        };
        st.store.persist(&session).map_err(ApiError::internal)?;
        Ok(Json(StepReply {
            status: session.status,
            day: session.day(),
            step_in_day: session.step_in_day(),
            records: raw(&records),
        }))
    })
    .await
    .map_err(ApiError::internal)?
}

#[derive(Serialize)]
struct ApiSession {
    session_id: String,
    player: PlayerMetadata,
    world: String,
    provider: String,
    status: SessionStatus,
    day: u32,
    step_in_day: u32,
    /// The most recent records.
    records: Vec<Box<RawValue>>,
}

async fn get_session(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<ApiSession>> {
    let slot = state.slot(&id)?;
    let s = slot.session.lock().await;
    let from = s.log.len().saturating_sub(state.server.page_size);
    Ok(Json(ApiSession {
        session_id: s.id.clone(),
        player: s.player.clone(),
        world: slot.world.clone(),
        provider: slot.provider.clone(),
        status: s.status,
        day: s.day(),
        step_in_day: s.step_in_day(),
        records: raw(&s.log[from..]),
    }))
}

#[derive(Deserialize)]
struct LogQuery {
    from_seq: Option<u64>,
    limit: Option<usize>,
}

#[derive(Serialize)]
struct LogPage {
    records: Vec<Box<RawValue>>,
    /// Cursor for the next page, absent on the last one.
    #[serde(skip_serializing_if = "Option::is_none")]
    next_seq: Option<u64>,
}

async fn get_log(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<LogQuery>,
) -> ApiResult<Json<LogPage>> {
    let slot = state.slot(&id)?;
    let s = slot.session.lock().await;
    let limit = q.limit.unwrap_or(state.server.page_size).clamp(1, state.server.page_size);
    let from = q.from_seq.unwrap_or(0);
    let start = s.log.partition_point(|r| r.seq < from);
    let end = (start + limit).min(s.log.len());
    Ok(Json(LogPage {
        records: raw(&s.log[start..end]),
        next_seq: s.log.get(end).map(|r| r.seq),
    }))
}

/// A log to analyze: a stored session or a file under the configured logs
/// directory.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
enum LogRef {
    Session {
        session: String,
    },
    File {
        file: String,
        #[serde(default)]
        player: Option<String>,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnalysisRequest {
    designer: Vec<LogRef>,
    players: Vec<LogRef>,
    #[serde(default)]
    world: Option<String>,
    #[serde(default)]
    provider: Option<String>,
}

#[derive(Serialize)]
struct AnalysisCreated {
    graph_id: String,
    total: usize,
    unique: usize,
}

fn unprocessable(code: &'static str, msg: impl Into<String>) -> ApiError {
    ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, code, msg)
}

impl AppState {
    fn resolve(&self, r: &LogRef) -> ApiResult<(String, Vec<LogRecord>)> {
        match r {
            LogRef::Session { session } => {
                let s = self.store.load(session).map_err(|e| match e {
                    StoreError::NotFound(_) => ApiError::not_found("session", session),
                    other => ApiError::internal(other),
                })?;
                Ok((s.player.player_id.clone(), s.log))
            }
            LogRef::File { file, player } => {
                let root = self
                    .server
                    .logs_dir
                    .as_ref()
                    .ok_or_else(|| unprocessable("no_logs_dir", "file references need a configured logs_dir"))?;
                let rel = Path::new(file);
                if !rel.components().all(|c| matches!(c, Component::Normal(_))) {
                    return Err(unprocessable("bad_log_ref", format!("`{file}` must be a relative path inside logs_dir")));
                }
                let path = root.join(rel);
                let f = fs::File::open(&path).map_err(|_| ApiError::not_found("log file", file))?;
                let log = read_jsonl(std::io::BufReader::new(f))
                    .map_err(|e| unprocessable("bad_log", format!("{file}: {e}")))?;
                let id = player.clone().unwrap_or_else(|| {
                    rel.file_stem().map_or_else(|| file.clone(), |s| s.to_string_lossy().into_owned())
                });
                Ok((id, log))
            }
        }
    }
}

/// Content hash of everything that determines an analysis result.
pub fn graph_id(world: &str, provider: &str, designer: &[(String, Vec<LogRecord>)], players: &[PlayerLogs]) -> String {
    let mut h = Sha256::new();
    for part in [world, provider] {
        h.update(part.as_bytes());
        h.update([0]);
    }
    let mut feed = |tag: &[u8], id: &str, log: &[LogRecord]| {
        h.update(tag);
        h.update(id.as_bytes());
        h.update([0]);
        for r in log {
            h.update(r.to_json_line().as_bytes());
            h.update(b"\n");
        }
        h.update([0]);
    };
    for (id, log) in designer {
        feed(b"d", id, log);
    }
    for p in players {
        feed(b"p", &p.player_id, &p.log);
    }
    hex::encode(h.finalize())
}

fn provider_failure(e: &GraphError) -> Option<&ProviderError> {
    match e {
        GraphError::Distill(DistillError::Provider(p)) | GraphError::Merge(MergeError::Matcher(p)) => Some(p),
        _ => None,
    }
}

async fn create_graph(
    State(state): State<Arc<AppState>>,
    Json(req): Json<AnalysisRequest>,
) -> ApiResult<(StatusCode, Json<AnalysisCreated>)> {
    let world = req.world.unwrap_or_else(|| DEFAULT_WORLD.into());
    let provider_name = req.provider.unwrap_or_else(|| DEFAULT_PROVIDER.into());
    let spec = state
        .worlds
        .get(&world)
        .cloned()
        .ok_or_else(|| unprocessable("unknown_world", format!("no world `{world}`")))?;
    let provider = state
        .providers
        .get(&provider_name)
        .cloned()
        .ok_or_else(|| unprocessable("unknown_provider", format!("no provider config `{provider_name}`")))?;
    if req.designer.is_empty() {
        return Err(unprocessable("no_walkthroughs", "at least one designer log is required"));
    }
    let designer = req.designer.iter().map(|r| state.resolve(r)).collect::<ApiResult<Vec<_>>>()?;
    let players: Vec<PlayerLogs> = req
        .players
        .iter()
        .map(|r| state.resolve(r).map(|(player_id, log)| PlayerLogs { player_id, log }))
        .collect::<ApiResult<_>>()?;
    let id = graph_id(&world, &provider_name, &designer, &players);
    let existing = state.analyses.read().expect("analyses").get(&id).cloned();
    if let Some(a) = existing {
        return Ok((
            StatusCode::CREATED,
            Json(AnalysisCreated {
                graph_id: id,
                total: a.report.total,
                unique: a.report.unique,
            }),
        ));
    }
    let retry = state.server.retry_after_secs;
    let gid = id.clone();
    let stored = tokio::task::spawn_blocking(move || {
        analyze(&designer, &players, provider.as_ref(), &spec)
            .map(|a| StoredAnalysis {
                graph_id: gid,
                designer: a.designer,
                merged: a.merged,
                report: a.report,
            })
            .map_err(|e| match provider_failure(&e) {
                Some(p) => ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "provider_unavailable", p.to_string()).retry(retry),
                None => unprocessable("analysis_failed", e.to_string()),
            })
    })
    .await
    .map_err(ApiError::internal)??;
    let text = serde_json::to_string(&stored).map_err(ApiError::internal)?;
    fs::write(state.graph_path(&id), text).map_err(ApiError::internal)?;
    let reply = AnalysisCreated {
        graph_id: id.clone(),
        total: stored.report.total,
        unique: stored.report.unique,
    };
    state.analyses.write().expect("analyses").insert(id, Arc::new(stored));
    Ok((StatusCode::CREATED, Json(reply)))
}

impl AppState {
    fn analysis(&self, id: &str) -> ApiResult<Arc<StoredAnalysis>> {
        if let Some(a) = self.analyses.read().expect("analyses").get(id) {
            return Ok(a.clone());
        }
        if !id.chars().all(|c| c.is_ascii_hexdigit()) {
            return Err(ApiError::not_found("graph", id));
        }
        let text = fs::read_to_string(self.graph_path(id)).map_err(|_| ApiError::not_found("graph", id))?;
        let stored: Arc<StoredAnalysis> = Arc::new(serde_json::from_str(&text).map_err(ApiError::internal)?);
        self.analyses.write().expect("analyses").insert(id.to_string(), stored.clone());
        Ok(stored)
    }
}

async fn get_graph(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Response> {
    let a = state.analysis(&id)?;
    Ok(([(header::CONTENT_TYPE, "application/json")], to_json(&a.merged)).into_response())
}

async fn get_emergence(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Json<EmergenceReport>> {
    Ok(Json(state.analysis(&id)?.report.clone()))
}
