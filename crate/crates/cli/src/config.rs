//! Settings from a TOML file, overridden by `ARGCHAT_*` environment
//! variables, overridden in turn by command-line flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use argchat_core::dialogue::{DialogueConfig, DialogueEngine, Variant};
use argchat_core::store::SessionDefaults;
use argchat_core::{fixtures, load_kb, KbError, Policy};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Id of the knowledge base compiled into the binary.
pub const BUNDLED_KB_ID: &str = "reference";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid config {path}: {source}")]
    Toml { path: PathBuf, source: toml::de::Error },
    #[error("invalid value `{value}` for {var}")]
    Env { var: &'static str, value: String },
    #[error("knowledge base {path}: {source}")]
    Kb { path: PathBuf, source: KbError },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Extra knowledge base, served under its file stem.
    pub kb: Option<PathBuf>,
    pub seed: u64,
    pub expand_min_words: usize,
    pub max_expand_prompts: usize,
    pub listen: String,
    /// Where session logs live; in-memory when unset.
    pub data_dir: Option<PathBuf>,
}

impl Default for Settings {
    fn default() -> Self {
        let d = DialogueConfig::new(Variant::I, Policy::Baseline);
        Self {
            kb: None,
            seed: 0,
            expand_min_words: d.expand_min_words,
            max_expand_prompts: d.max_expand_prompts,
            listen: "127.0.0.1:8080".into(),
            data_dir: None,
        }
    }
}

fn parse_env<T: std::str::FromStr>(var: &'static str, value: String) -> Result<T, ConfigError> {
    value.trim().parse().map_err(|_| ConfigError::Env { var, value })
}

impl Settings {
    /// Defaults, then the optional file, then the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut s = match path {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        s.apply_env(|k| std::env::var(k).ok())?;
        Ok(s)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        toml::from_str(&text).map_err(|source| ConfigError::Toml { path: path.into(), source })
    }

    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(v) = get("ARGCHAT_KB") {
            self.kb = Some(v.into());
        }
        if let Some(v) = get("ARGCHAT_SEED") {
            self.seed = parse_env("ARGCHAT_SEED", v)?;
        }
        if let Some(v) = get("ARGCHAT_EXPAND_MIN_WORDS") {
            self.expand_min_words = parse_env("ARGCHAT_EXPAND_MIN_WORDS", v)?;
        }
        if let Some(v) = get("ARGCHAT_LISTEN") {
            self.listen = v;
        }
        if let Some(v) = get("ARGCHAT_DATA_DIR") {
            self.data_dir = Some(v.into());
        }
        Ok(())
    }

    pub fn session_defaults(&self) -> SessionDefaults {
        SessionDefaults {
            expand_min_words: self.expand_min_words,
            max_expand_prompts: self.max_expand_prompts,
            seed: self.seed,
        }
    }

    /// The bundled knowledge base plus the configured one, keyed by id.
    /// Returns the map and the id new sessions use by default.
    pub fn engines(&self) -> Result<(BTreeMap<String, DialogueEngine>, String), ConfigError> {
        let mut engines = BTreeMap::new();
        engines.insert(BUNDLED_KB_ID.to_owned(), DialogueEngine::new(Arc::new(fixtures::reference_kb())));
        let mut default = BUNDLED_KB_ID.to_owned();
        if let Some(path) = &self.kb {
            let kb = load_kb(path).map_err(|source| ConfigError::Kb { path: path.clone(), source })?;
            let id = kb_id_for(path);
            engines.insert(id.clone(), DialogueEngine::new(Arc::new(kb)));
            default = id;
        }
        Ok((engines, default))
    }

    /// The single engine offline commands run against.
    pub fn engine(&self) -> Result<(String, DialogueEngine), ConfigError> {
        let (mut engines, id) = self.engines()?;
        let engine = engines.remove(&id).expect("default engine present");
        Ok((id, engine))
    }
}

pub fn kb_id_for(path: &Path) -> String {
    path.file_stem().map_or_else(|| "kb".to_owned(), |s| s.to_string_lossy().into_owned())
}
