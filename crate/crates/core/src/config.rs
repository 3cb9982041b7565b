//! Resolved run configuration. Layers, lowest first: built-in defaults,
//! then each JSON file in the order given, then command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::policy::{AgentModel, RemoteConfig, ScriptedCapability};
use crate::reward::RewardConstants;
use crate::sim::{EpisodeConfig, TaskGenConfig};
use crate::train::{EnvConfig, EnvRetriever, TrainerConfig};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: invalid JSON: {message}")]
    Json { path: String, message: String },
    #[error("{path}: config field `{field}`: {message}")]
    Field { path: String, field: String, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub jobs: usize,
    pub reward: RewardConstants,
    pub episode: EpisodeConfig,
    pub tasks: TaskGenConfig,
    pub scripted: ScriptedCapability,
    pub remote: RemoteConfig,
    pub agent: AgentModel,
    pub retriever: EnvRetriever,
    pub trainer: TrainerConfig,
    /// Directory of template files overriding the built-in prompts.
    pub templates_dir: Option<PathBuf>,
    /// Inputs and outputs of the subcommand, filled in before it runs.
    pub paths: BTreeMap<String, PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let env = EnvConfig::default();
        Self {
            seed: 0,
            jobs: 1,
            reward: env.reward,
            episode: env.episode,
            tasks: env.tasks,
            scripted: ScriptedCapability::default(),
            remote: RemoteConfig::default(),
            agent: env.agent,
            retriever: env.retriever,
            trainer: TrainerConfig::default(),
            templates_dir: None,
            paths: BTreeMap::new(),
        }
    }
}

/// Recursively overlays `patch` onto `base`; objects merge, anything else
/// replaces.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn read_json(path: &Path) -> Result<Value, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    serde_json::from_str(&text).map_err(|e| ConfigError::Json { path: path.display().to_string(), message: e.to_string() })
}

impl RunConfig {
    /// Overlays a JSON file. With `section`, the file's object is placed
    /// under that key first (a trainer file goes under `trainer`).
    pub fn overlay_file(&mut self, path: &Path, section: Option<&str>) -> Result<(), ConfigError> {
        let mut patch = read_json(path)?;
        if let Some(key) = section {
            patch = Value::Object([(key.to_string(), patch)].into_iter().collect());
        }
        self.overlay(patch, &path.display().to_string())
    }

    pub fn overlay(&mut self, patch: Value, origin: &str) -> Result<(), ConfigError> {
        let mut base = serde_json::to_value(&*self).expect("config serialises");
        merge(&mut base, patch);
        *self = serde_path_to_error::deserialize(base).map_err(|e| ConfigError::Field {
            path: origin.to_string(),
            field: e.path().to_string(),
            message: e.into_inner().to_string(),
        })?;
        Ok(())
    }

    /// Checks every section; called once all layers are applied.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.reward.validate().map_err(|e| invalid(&e))?;
        self.episode.validate().map_err(|e| invalid(&e))?;
        self.scripted.validate().map_err(|e| invalid(&e))?;
        self.agent.validate().map_err(|e| invalid(&e))?;
        self.trainer.validate().map_err(|e| invalid(&e))?;
        if self.jobs == 0 {
            return Err(ConfigError::Invalid("jobs must be at least 1".into()));
        }
        Ok(())
    }

    pub fn env(&self) -> EnvConfig {
        EnvConfig {
            tasks: self.tasks.clone(),
            episode: self.episode.clone(),
            reward: self.reward,
            agent: self.agent,
            retriever: self.retriever,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// Writes this config as `<output>.config.json`.
    pub fn write_beside(&self, output: &Path) -> Result<PathBuf, ConfigError> {
        let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".config.json");
        let path = output.with_file_name(name);
        std::fs::write(&path, self.to_json() + "\n")
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Ok(path)
    }
}
