//! Layered configuration: built-in defaults, then a TOML file, then
//! `key=value` overrides, then the seed from `SEE_MIMO_SEED` or the command
//! line.

use std::path::{Path, PathBuf};

use see_mimo_core::SystemConfig;
use serde_json::Value;

/// Environment variable that replaces the master seed.
pub const SEED_ENV: &str = "SEE_MIMO_SEED";

/// Errors raised while assembling a configuration.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    /// The config file could not be read.
    #[error("cannot read config file {path}: {source}")]
    Read {
        /// Offending path.
        path: PathBuf,
        /// Underlying IO error.
        source: std::io::Error,
    },
    /// The file is not valid TOML or names an unknown field.
    #[error("invalid config file {path}: {source}")]
    Parse {
        /// Offending path.
        path: PathBuf,
        /// Parser message.
        source: toml::de::Error,
    },
    /// A `--set` override could not be applied.
    #[error("bad override `{0}`: {1}")]
    Override(String, String),
    /// The seed variable is not an unsigned integer.
    #[error("{SEED_ENV} must be an unsigned integer, got `{0}`")]
    Seed(String),
    /// A field breaks one of the model invariants.
    #[error("{0}")]
    Invalid(#[from] see_mimo_core::Error),
}

/// Read a TOML file. Missing keys take their default values.
pub fn read_file(path: &Path) -> Result<SystemConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_owned(),
        source,
    })?;
    toml::from_str(&text).map_err(|source| ConfigError::Parse {
        path: path.to_owned(),
        source,
    })
}

/// Apply `key=value` pairs. Values are parsed as JSON scalars, falling back
/// to plain strings, so `max_power=10` and `update_order=jacobi` both work.
pub fn apply_overrides(cfg: &SystemConfig, sets: &[String]) -> Result<SystemConfig, ConfigError> {
    if sets.is_empty() {
        return Ok(cfg.clone());
    }
    let mut tree = serde_json::to_value(cfg).expect("config serializes");
    let map = tree.as_object_mut().expect("config is a map");
    for set in sets {
        let (key, raw) = set
            .split_once('=')
            .ok_or_else(|| ConfigError::Override(set.clone(), "expected key=value".into()))?;
        let key = key.trim();
        if !map.contains_key(key) {
            return Err(ConfigError::Override(
                set.clone(),
                format!("unknown field `{key}`"),
            ));
        }
        let value = serde_json::from_str(raw.trim())
            .unwrap_or_else(|_| Value::String(raw.trim().to_owned()));
        map.insert(key.to_owned(), value);
    }
    serde_json::from_value(tree).map_err(|e| ConfigError::Override(sets.join(" "), e.to_string()))
}

/// Seed from [`SEED_ENV`], if set.
pub fn env_seed() -> Result<Option<u64>, ConfigError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| ConfigError::Seed(v)),
        Err(_) => Ok(None),
    }
}

/// Layer everything on top of `base` and validate the result.
pub fn resolve(
    base: SystemConfig,
    file: Option<&Path>,
    sets: &[String],
    seed: Option<u64>,
) -> Result<SystemConfig, ConfigError> {
    let cfg = match file {
        Some(path) => read_file(path)?,
        None => base,
    };
    let mut cfg = apply_overrides(&cfg, sets)?;
    if let Some(s) = env_seed()? {
        cfg.seed = s;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}
