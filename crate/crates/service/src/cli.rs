//! Command-line front end. Every failure exits non-zero with a JSON error
//! object on stderr.

use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use dejaboom_core::narrative::{analyze, from_json, to_dot, to_json, PlayerLogs};
use dejaboom_core::session::{read_jsonl, write_jsonl, Role};
use dejaboom_core::world::WorldError;
use dejaboom_core::{
    dejaboom, load_world_spec, GameRuntime, Gateway, LogRecord, PlayerMetadata, Provider, RuleBasedProvider,
    SessionStatus, WorldSpec,
};
use serde_json::json;

use crate::api::{router, AppState};
use crate::config::{build_provider, ProviderConfig, ServiceConfig};

#[derive(Parser, Debug)]
#[command(name = "dejaboom", version, about = "Dejaboom! text adventure and narrative-graph analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProviderKind {
    Rule,
    Remote,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GraphFormat {
    Dot,
    Json,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Play in the terminal, one command per line on stdin.
    Play {
        /// World spec file; the bundled Dejaboom world by default.
        #[arg(long)]
        world: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "rule")]
        provider: ProviderKind,
        /// Service config holding a `[providers.remote]` section. Without
        /// it the remote provider is read from DEJABOOM_ENDPOINT,
        /// DEJABOOM_MODEL and DEJABOOM_API_KEY.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "player")]
        player: String,
        /// Write the session log here as JSON lines.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Build the designer graph, merge every player log and report
    /// emergent strategies.
    Analyze {
        /// Player logs (*.jsonl).
        #[arg(long)]
        logs: PathBuf,
        /// Designer walkthrough logs (*.jsonl).
        #[arg(long)]
        designer: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        world: Option<PathBuf>,
    },
    /// Graph file operations.
    Graph {
        #[command(subcommand)]
        command: GraphCommand,
    },
    /// Check a world spec file.
    Validate {
        #[arg(long)]
        world: PathBuf,
    },
    /// Run the HTTP API.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        bind: Option<String>,
    },
}

#[derive(Subcommand, Debug)]
pub enum GraphCommand {
    /// Convert a graph JSON file to DOT or canonical JSON.
    Export {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, value_enum, default_value = "dot")]
        format: GraphFormat,
        /// Output file; stdout by default.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// A failure reported as `{"error": {...}}` on stderr.
#[derive(Debug)]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
    pub detail: serde_json::Value,
}

impl CliError {
    fn new(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            detail: serde_json::Value::Null,
        }
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Self::new("io", format!("{}: {e}", path.display()))
    }

    pub fn to_json(&self) -> String {
        let mut err = json!({"code": self.code, "message": self.message});
        if let serde_json::Value::Object(extra) = &self.detail {
            err.as_object_mut().expect("object").extend(extra.clone());
        }
        json!({ "error": err }).to_string()
    }
}

fn world_error(path: &Path, e: WorldError) -> CliError {
    let mut err = CliError::new("invalid_world", format!("{}: {e}", path.display()));
    match &e {
        WorldError::Invalid(v) => err.detail = json!({"invariant": v.invariant()}),
        WorldError::Parse { line, column, .. } => {
            err.code = "parse_error";
            err.detail = json!({"line": line, "column": column});
        }
        WorldError::UnknownFlag(_) => {}
    }
    err
}

fn load_world(path: Option<&Path>) -> Result<WorldSpec, CliError> {
    match path {
        None => Ok(dejaboom()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            load_world_spec(&text).map_err(|e| world_error(p, e))
        }
    }
}

fn remote_provider(config: Option<&Path>) -> Result<Arc<dyn Provider>, CliError> {
    let env = |k: &str| std::env::var(k).ok();
    let cfg = match config {
        Some(path) => {
            let cfg = ServiceConfig::load(path).map_err(|e| CliError::new("config", e.to_string()))?;
            cfg.providers
                .get("remote")
                .cloned()
                .ok_or_else(|| CliError::new("config", format!("{} has no [providers.remote]", path.display())))?
        }
        None => ProviderConfig::Remote {
            endpoint: env("DEJABOOM_ENDPOINT")
                .ok_or_else(|| CliError::new("config", "DEJABOOM_ENDPOINT is not set"))?,
            model: env("DEJABOOM_MODEL").unwrap_or_else(|| "default".into()),
            api_key_env: env("DEJABOOM_API_KEY").map(|_| "DEJABOOM_API_KEY".into()),
            timeout_secs: None,
            retries: None,
            backoff_ms: None,
            prompts_dir: None,
        },
    };
    build_provider("remote", &cfg, &env).map_err(|e| CliError::new("config", e.to_string()))
}

fn speaker(r: &LogRecord, spec: &WorldSpec) -> Option<String> {
    match &r.role {
        Role::Player => None,
        Role::Npc(id) => Some(spec.npc(id).map_or_else(|| id.to_string(), |n| n.name.clone())),
        Role::GameFeedback | Role::System => Some(String::new()),
    }
}

fn print_records(out: &mut impl Write, records: &[LogRecord], spec: &WorldSpec) -> std::io::Result<()> {
    for r in records {
        match speaker(r, spec) {
            None => {}
            Some(s) if s.is_empty() => writeln!(out, "{}", r.text)?,
            Some(s) => writeln!(out, "{s}: {}", r.text)?,
        }
    }
    Ok(())
}

/// Interactive loop over `input`. Returns the final status.
pub fn play(
    spec: WorldSpec,
    provider: Arc<dyn Provider>,
    player: &str,
    input: impl BufRead,
    mut out: impl Write,
    log: Option<&Path>,
) -> Result<SessionStatus, CliError> {
    let rt = GameRuntime::new(Arc::new(spec), Gateway::new(provider));
    let spec = rt.spec().clone();
    let mut session = rt.start_session(PlayerMetadata::new(player));
    let stdout_err = |e: std::io::Error| CliError::new("io", e.to_string());
    print_records(&mut out, &session.log, &spec).map_err(stdout_err)?;
    for line in input.lines() {
        let line = line.map_err(stdout_err)?;
        if line.trim().is_empty() {
            continue;
        }
        writeln!(out, "> {}", line.trim()).map_err(stdout_err)?;
        let records = rt
            .step(&mut session, &line)
            .map_err(|e| CliError::new("step", e.to_string()))?;
        print_records(&mut out, &records, &spec).map_err(stdout_err)?;
        if session.status != SessionStatus::Running {
            break;
        }
    }
    writeln!(out, "[{:?} on day {}, step {}]", session.status, session.day(), session.step_in_day())
        .map_err(stdout_err)?;
    if let Some(path) = log {
        let f = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
        write_jsonl(std::io::BufWriter::new(f), &session.log).map_err(|e| CliError::io(path, e))?;
    }
    Ok(session.status)
}

fn jsonl_files(dir: &Path) -> Result<Vec<(String, Vec<LogRecord>)>, CliError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let f = fs::File::open(&p).map_err(|e| CliError::io(&p, e))?;
            let log = read_jsonl(std::io::BufReader::new(f))
                .map_err(|e| CliError::new("bad_log", format!("{}: {e}", p.display())))?;
            let id = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok((id, log))
        })
        .collect()
}

/// The batch pipeline. Writes `designer.json`, `graph.json`, `graph.dot`
/// and `emergence.json` to `out`.
pub fn analyze_dirs(logs: &Path, designer: &Path, out: &Path, spec: &WorldSpec) -> Result<(), CliError> {
    let walkthroughs = jsonl_files(designer)?;
    let players: Vec<PlayerLogs> = jsonl_files(logs)?
        .into_iter()
        .map(|(player_id, log)| PlayerLogs { player_id, log })
        .collect();
    let analysis = analyze(&walkthroughs, &players, &RuleBasedProvider::default(), spec)
        .map_err(|e| CliError::new("analysis_failed", e.to_string()))?;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let report = serde_json::to_string_pretty(&analysis.report).expect("report serializes");
    for (name, text) in [
        ("designer.json", to_json(&analysis.designer)),
        ("graph.json", to_json(&analysis.merged)),
        ("graph.dot", to_dot(&analysis.merged)),
        ("emergence.json", report),
    ] {
        let path = out.join(name);
        fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
    }
    Ok(())
}

pub fn export_graph(graph: &Path, format: GraphFormat) -> Result<String, CliError> {
    let text = fs::read_to_string(graph).map_err(|e| CliError::io(graph, e))?;
    let g = from_json(&text).map_err(|e| CliError::new("invalid_graph", format!("{}: {e}", graph.display())))?;
    Ok(match format {
        GraphFormat::Dot => to_dot(&g),
        GraphFormat::Json => to_json(&g),
    })
}

async fn serve(config: Option<&Path>, bind: Option<String>) -> Result<(), CliError> {
    let cfg = match config {
        Some(p) => ServiceConfig::load(p).map_err(|e| CliError::new("config", e.to_string()))?,
        None => ServiceConfig::default(),
    };
    let addr = bind.unwrap_or_else(|| cfg.server.bind.clone());
    let state = AppState::new(&cfg, |k| std::env::var(k).ok()).map_err(|e| CliError::new("config", e.to_string()))?;
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .map_err(|e| CliError::new("bind", format!("{addr}: {e}")))?;
    log::info!("listening on {addr}");
    axum::serve(listener, router(Arc::new(state)))
        .await
        .map_err(|e| CliError::new("serve", e.to_string()))
}

/// Run a parsed command line with the process's stdin and stdout.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Play {
            world,
            provider,
            config,
            player,
            log,
        } => {
            let spec = load_world(world.as_deref())?;
            let provider: Arc<dyn Provider> = match provider {
                ProviderKind::Rule => Arc::new(RuleBasedProvider::default()),
                ProviderKind::Remote => remote_provider(config.as_deref())?,
            };
            let stdin = std::io::stdin();
            play(spec, provider, &player, stdin.lock(), std::io::stdout().lock(), log.as_deref())?;
            Ok(())
        }
        Command::Analyze {
            logs,
            designer,
            out,
            world,
        } => analyze_dirs(&logs, &designer, &out, &load_world(world.as_deref())?),
        Command::Graph {
            command: GraphCommand::Export { graph, format, out },
        } => {
            let text = export_graph(&graph, format)?;
            match out {
                Some(p) => fs::write(&p, text + "\n").map_err(|e| CliError::io(&p, e)),
                None => {
                    println!("{text}");
                    Ok(())
                }
            }
        }
        Command::Validate { world } => {
            let spec = load_world(Some(&world))?;
            println!(
                "{}",
                json!({"valid": true, "locations": spec.locations.len(), "npcs": spec.npcs.len(), "milestones": spec.milestones.len()})
            );
            Ok(())
        }
        Command::Serve { config, bind } => tokio::runtime::Builder::new_multi_thread()
            .enable_all()
            .build()
            .map_err(|e| CliError::new("runtime", e.to_string()))?
            .block_on(serve(config.as_deref(), bind)),
    }
}
