//! Service configuration: where to listen, where state lives, and the
//! registry's visibility.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::registry::Visibility;
use crate::security::MaskingRules;

/// Environment variable naming the config file.
pub const CONFIG_ENV: &str = "ASF_CONFIG";

pub const DEFAULT_PORT: u16 = 8700;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file {0}: {1}")]
    Read(PathBuf, std::io::Error),
    #[error("config parse: {0}")]
    Parse(String),
    #[error("port must be nonzero")]
    ZeroPort,
    #[error("store, token, and audit paths must be distinct ({0})")]
    ClashingPaths(PathBuf),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ServiceConfig {
    #[serde(default = "default_listen")]
    pub listen_address: String,
    #[serde(default = "default_port")]
    pub port: u16,
    pub store_file: PathBuf,
    pub token_file: PathBuf,
    pub audit_log: PathBuf,
    #[serde(default = "default_visibility")]
    pub registry_visibility: Visibility,
    #[serde(default = "default_max_parallel")]
    pub max_parallel: usize,
    #[serde(default)]
    pub masking: MaskingRules,
}

fn default_listen() -> String {
    "127.0.0.1".to_string()
}

fn default_port() -> u16 {
    DEFAULT_PORT
}

fn default_visibility() -> Visibility {
    Visibility::Public
}

fn default_max_parallel() -> usize {
    crate::workflow::DEFAULT_MAX_PARALLEL
}

impl ServiceConfig {
    /// A config rooted at `dir` with default file names, suitable for
    /// fresh installations and tests.
    pub fn at_dir(dir: &Path) -> ServiceConfig {
        ServiceConfig {
            listen_address: default_listen(),
            port: DEFAULT_PORT,
            store_file: dir.join("store.json"),
            token_file: dir.join("tokens.json"),
            audit_log: dir.join("audit.ndjson"),
            registry_visibility: Visibility::Public,
            max_parallel: default_max_parallel(),
            masking: MaskingRules::default(),
        }
    }

    pub fn load(path: &Path) -> Result<ServiceConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Read(path.to_path_buf(), e))?;
        let config: ServiceConfig =
            serde_yaml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.port == 0 {
            return Err(ConfigError::ZeroPort);
        }
        let paths = [&self.store_file, &self.token_file, &self.audit_log];
        for (i, a) in paths.iter().enumerate() {
            for b in paths.iter().skip(i + 1) {
                if a == b {
                    return Err(ConfigError::ClashingPaths((*a).clone()));
                }
            }
        }
        Ok(())
    }

    /// Base URL the registry namespace lives under.
    pub fn base_url(&self) -> String {
        format!("http://{}:{}/entries", self.listen_address, self.port)
    }

    pub fn listen(&self) -> String {
        format!("{}:{}", self.listen_address, self.port)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn yaml_config_round_trip() {
        let text = "\
listen_address: 0.0.0.0
port: 9000
store_file: /tmp/asf/store.json
token_file: /tmp/asf/tokens.json
audit_log: /tmp/asf/audit.ndjson
registry_visibility: private
max_parallel: 2
";
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.yaml");
        std::fs::write(&path, text).unwrap();
        let config = ServiceConfig::load(&path).unwrap();
        assert_eq!(config.port, 9000);
        assert_eq!(config.registry_visibility, Visibility::Private);
        assert_eq!(config.max_parallel, 2);
        assert_eq!(config.listen(), "0.0.0.0:9000");
    }

    #[test]
    fn defaults_fill_in() {
        let text = "\
store_file: /tmp/a
token_file: /tmp/b
audit_log: /tmp/c
";
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.yaml");
        std::fs::write(&path, text).unwrap();
        let config = ServiceConfig::load(&path).unwrap();
        assert_eq!(config.port, DEFAULT_PORT);
        assert_eq!(config.registry_visibility, Visibility::Public);
    }

    #[test]
    fn clashing_paths_are_rejected() {
        let mut config = ServiceConfig::at_dir(Path::new("/tmp/asf"));
        config.token_file = config.store_file.clone();
        assert!(matches!(
            config.validate(),
            Err(ConfigError::ClashingPaths(_))
        ));
    }

    #[test]
    fn zero_port_is_rejected() {
        let mut config = ServiceConfig::at_dir(Path::new("/tmp/asf"));
        config.port = 0;
        assert!(matches!(config.validate(), Err(ConfigError::ZeroPort)));
    }
}
