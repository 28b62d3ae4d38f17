//! Server configuration: named worlds and provider configs from TOML, with
//! secrets taken from the environment.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use dejaboom_core::gateway::{PromptSet, RemoteConfig, RemoteProvider};
use dejaboom_core::{dejaboom, load_world_spec, Provider, RuleBasedProvider, WorldSpec};
use serde::Deserialize;

pub const DEFAULT_WORLD: &str = "dejaboom";
pub const DEFAULT_PROVIDER: &str = "rule";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read `{path}`: {message}")]
    Io { path: String, message: String },
    #[error("bad config: {0}")]
    Parse(String),
    #[error("world `{name}`: {message}")]
    World { name: String, message: String },
    #[error("provider `{provider}` needs the environment variable `{var}`")]
    MissingSecret { provider: String, var: String },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BusyPolicy {
    /// A second command for a busy session waits its turn.
    #[default]
    Queue,
    /// A second command for a busy session is refused with 429.
    Reject,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub bind: String,
    /// Sessions, session metadata and analysis results live here.
    pub data_dir: PathBuf,
    /// Root for `{"file": ...}` log references in analysis requests.
    pub logs_dir: Option<PathBuf>,
    pub busy: BusyPolicy,
    pub retry_after_secs: u64,
    pub page_size: usize,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8080".into(),
            data_dir: PathBuf::from("data"),
            logs_dir: None,
            busy: BusyPolicy::Queue,
            retry_after_secs: 5,
            page_size: 100,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProviderConfig {
    Rule,
    Remote {
        endpoint: String,
        model: String,
        /// Variable holding the API key. Keys never appear in config files.
        #[serde(default)]
        api_key_env: Option<String>,
        #[serde(default)]
        timeout_secs: Option<u64>,
        #[serde(default)]
        retries: Option<u32>,
        #[serde(default)]
        backoff_ms: Option<u64>,
        #[serde(default)]
        prompts_dir: Option<PathBuf>,
    },
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub server: ServerConfig,
    /// World name to spec file. `dejaboom` is always available.
    pub worlds: BTreeMap<String, PathBuf>,
    pub providers: BTreeMap<String, ProviderConfig>,
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

impl ServiceConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_toml(&read(path)?)
    }

    pub fn load_worlds(&self) -> Result<BTreeMap<String, Arc<WorldSpec>>, ConfigError> {
        let mut worlds = BTreeMap::from([(DEFAULT_WORLD.to_string(), Arc::new(dejaboom()))]);
        for (name, path) in &self.worlds {
            let spec = load_world_spec(&read(path)?).map_err(|e| ConfigError::World {
                name: name.clone(),
                message: e.to_string(),
            })?;
            worlds.insert(name.clone(), Arc::new(spec));
        }
        Ok(worlds)
    }

    /// Build every named provider. `env` looks up secrets.
    pub fn build_providers(
        &self,
        env: impl Fn(&str) -> Option<String>,
    ) -> Result<BTreeMap<String, Arc<dyn Provider>>, ConfigError> {
        let mut out: BTreeMap<String, Arc<dyn Provider>> = BTreeMap::new();
        out.insert(DEFAULT_PROVIDER.into(), Arc::new(RuleBasedProvider::default()));
        for (name, cfg) in &self.providers {
            out.insert(name.clone(), build_provider(name, cfg, &env)?);
        }
        Ok(out)
    }
}

pub fn build_provider(
    name: &str,
    cfg: &ProviderConfig,
    env: &dyn Fn(&str) -> Option<String>,
) -> Result<Arc<dyn Provider>, ConfigError> {
    match cfg {
        ProviderConfig::Rule => Ok(Arc::new(RuleBasedProvider::default())),
        ProviderConfig::Remote {
            endpoint,
            model,
            api_key_env,
            timeout_secs,
            retries,
            backoff_ms,
            prompts_dir,
        } => {
            let mut rc = RemoteConfig::new(endpoint, model);
            if let Some(var) = api_key_env {
                rc.api_key = Some(env(var).ok_or_else(|| ConfigError::MissingSecret {
                    provider: name.to_string(),
                    var: var.clone(),
                })?);
            }
            if let Some(t) = timeout_secs {
                rc.timeout_secs = *t;
            }
            if let Some(r) = retries {
                rc.retries = *r;
            }
            if let Some(b) = backoff_ms {
                rc.backoff_ms = *b;
            }
            let prompts = match prompts_dir {
                Some(dir) => PromptSet::with_overrides(dir).map_err(|e| ConfigError::Parse(e.to_string()))?,
                None => PromptSet::default(),
            };
            Ok(Arc::new(RemoteProvider::with_prompts(rc, prompts)))
        }
    }
}
