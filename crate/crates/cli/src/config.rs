//! Flat `key = value` configuration.
//!
//! Precedence, lowest to highest: built-in defaults, config file,
//! `GAUDI_*` environment variables, command-line flags.

use std::path::{Path, PathBuf};
use std::time::Duration;

use gaudi_core::SamplingConfig;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("config key {key}: {message}")]
    Value { key: String, message: String },
}

/// Environment variable → config key.
pub const ENV_KEYS: &[(&str, &str)] = &[
    ("GAUDI_EMBED_URL", "embed_url"),
    ("GAUDI_LLM_URL", "llm_url"),
    ("GAUDI_LLM_MODEL", "llm_model"),
    ("GAUDI_STORE", "store_path"),
    ("GAUDI_MANIFEST", "manifest_path"),
    ("GAUDI_BIND", "bind_addr"),
];

pub const DEFAULT_BIND: &str = "127.0.0.1:8080";
pub const DEFAULT_DIM: usize = 512;
pub const DEFAULT_LLM_MODEL: &str = "davinci-002";
pub const DEFAULT_LLM_KEY_ENV: &str = "GAUDI_LLM_KEY";

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub embed_url: Option<String>,
    pub llm_url: Option<String>,
    pub llm_model: String,
    /// Name of the environment variable holding the LLM credential.
    pub llm_key_env: String,
    pub dim: usize,
    pub store_path: Option<PathBuf>,
    pub manifest_path: Option<PathBuf>,
    pub bind_addr: String,
    pub image_root: Option<PathBuf>,
    pub static_dir: Option<PathBuf>,
    pub session_ttl: Duration,
    pub example_path: Option<PathBuf>,
    pub llm_fixture: Option<PathBuf>,
    pub sampling: SamplingConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            embed_url: None,
            llm_url: None,
            llm_model: DEFAULT_LLM_MODEL.into(),
            llm_key_env: DEFAULT_LLM_KEY_ENV.into(),
            dim: DEFAULT_DIM,
            store_path: None,
            manifest_path: None,
            bind_addr: DEFAULT_BIND.into(),
            image_root: None,
            static_dir: None,
            session_ttl: gaudi_service::DEFAULT_SESSION_TTL,
            example_path: None,
            llm_fixture: None,
            sampling: SamplingConfig::default(),
        }
    }
}

/// Parses `key = value` lines. `#` starts a comment line; values may be
/// wrapped in double quotes.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: i + 1,
            message: "expected key = value".into(),
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(ConfigError::Syntax {
                line: i + 1,
                message: "empty key".into(),
            });
        }
        let mut value = value.trim();
        if value.len() >= 2 && value.starts_with('"') && value.ends_with('"') {
            value = &value[1..value.len() - 1];
        }
        out.push((key.to_owned(), value.to_owned()));
    }
    Ok(out)
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::Value {
        key: key.into(),
        message: e.to_string(),
    })
}

fn non_empty(value: &str) -> Option<String> {
    (!value.is_empty()).then(|| value.to_owned())
}

impl Config {
    /// Defaults, then `file` (if any), then the given environment.
    pub fn load(
        file: Option<&Path>,
        env: impl Fn(&str) -> Option<String>,
    ) -> Result<Self, ConfigError> {
        let mut config = Config::default();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
                path: path.to_owned(),
                source,
            })?;
            for (key, value) in parse_pairs(&text)? {
                config.set(&key, &value)?;
            }
        }
        for (var, key) in ENV_KEYS {
            if let Some(value) = env(var) {
                config.set(key, &value)?;
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "embed_url" => self.embed_url = non_empty(value),
            "llm_url" => self.llm_url = non_empty(value),
            "llm_model" => self.llm_model = value.to_owned(),
            "llm_key_env" => self.llm_key_env = value.to_owned(),
            "dim" => self.dim = parse_num(key, value)?,
            "store_path" => self.store_path = non_empty(value).map(PathBuf::from),
            "manifest_path" => self.manifest_path = non_empty(value).map(PathBuf::from),
            "bind_addr" => self.bind_addr = value.to_owned(),
            "image_root" => self.image_root = non_empty(value).map(PathBuf::from),
            "static_dir" => self.static_dir = non_empty(value).map(PathBuf::from),
            "session_ttl_secs" => {
                self.session_ttl = Duration::from_secs(parse_num(key, value)?)
            }
            "example_path" => self.example_path = non_empty(value).map(PathBuf::from),
            "llm_fixture" => self.llm_fixture = non_empty(value).map(PathBuf::from),
            "temperature" => self.sampling.temperature = parse_num(key, value)?,
            "top_p" => self.sampling.top_p = parse_num(key, value)?,
            "max_tokens" => self.sampling.max_tokens = parse_num(key, value)?,
            "frequency_penalty" => self.sampling.frequency_penalty = parse_num(key, value)?,
            "presence_penalty" => self.sampling.presence_penalty = parse_num(key, value)?,
            _ => {
                return Err(ConfigError::Value {
                    key: key.into(),
                    message: "unknown key".into(),
                })
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.dim == 0 {
            return Err(ConfigError::Value {
                key: "dim".into(),
                message: "must be >= 1".into(),
            });
        }
        if self.llm_model.trim().is_empty() {
            return Err(ConfigError::Value {
                key: "llm_model".into(),
                message: "must not be empty".into(),
            });
        }
        self.sampling.validate().map_err(|e| ConfigError::Value {
            key: "sampling".into(),
            message: e.to_string(),
        })
    }
}
