//! Service configuration: a TOML file with `BOTSHAPE_*` environment overrides.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use botshape_core::concept::{
    ConceptClient, ConceptError, ConceptSnapshot, LiveConceptSource, DEFAULT_CONCEPT_URL,
};
use botshape_core::dialogue::{GenerationBackend, RemoteBackend, StubBackend};
use botshape_core::registry::RegistryError;
use botshape_core::{AttributeRegistry, Engine, EngineConfig};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid setting {key}: {message}")]
    Invalid { key: String, message: String },
    #[error("registry: {0}")]
    Registry(#[from] RegistryError),
    #[error("concept snapshot: {0}")]
    Concept(#[from] ConceptError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Stub,
    Remote,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConceptSourceKind {
    Snapshot,
    Live,
}

impl std::str::FromStr for ConceptSourceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "snapshot" => Ok(ConceptSourceKind::Snapshot),
            "live" => Ok(ConceptSourceKind::Live),
            other => Err(format!("expected snapshot or live, got {other:?}")),
        }
    }
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stub" => Ok(BackendKind::Stub),
            "remote" => Ok(BackendKind::Remote),
            other => Err(format!("expected stub or remote, got {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub bind: String,
    pub store_dir: PathBuf,
    pub backend: BackendKind,
    pub backend_url: Option<String>,
    pub concept_source: ConceptSourceKind,
    pub concept_url: String,
    /// Replaces the shipped attribute list.
    pub registry_path: Option<PathBuf>,
    /// Replaces the shipped concept snapshot.
    pub snapshot_path: Option<PathBuf>,
    /// Origin allowed by CORS; `None` disables the CORS layer.
    pub cors_origin: Option<String>,
    /// Directory served under `/` (the browser client).
    pub static_dir: Option<PathBuf>,
    pub candidates: usize,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            bind: "127.0.0.1:8080".into(),
            store_dir: PathBuf::from("sessions"),
            backend: BackendKind::Stub,
            backend_url: None,
            concept_source: ConceptSourceKind::Snapshot,
            concept_url: DEFAULT_CONCEPT_URL.into(),
            registry_path: None,
            snapshot_path: None,
            cors_origin: Some("http://localhost:5173".into()),
            static_dir: None,
            candidates: botshape_core::dialogue::DEFAULT_CANDIDATES,
        }
    }
}

impl ServerConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Applies `BOTSHAPE_*` overrides from the given variables.
    pub fn apply_env<I, K, V>(&mut self, vars: I) -> Result<(), ConfigError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: Into<String>,
    {
        for (key, value) in vars {
            let key = key.as_ref();
            let Some(name) = key.strip_prefix("BOTSHAPE_") else {
                continue;
            };
            let value: String = value.into();
            let invalid = |message: String| ConfigError::Invalid {
                key: key.to_string(),
                message,
            };
            match name {
                "BIND" => self.bind = value,
                "STORE_DIR" => self.store_dir = value.into(),
                "BACKEND" => self.backend = value.parse().map_err(invalid)?,
                "BACKEND_URL" => self.backend_url = Some(value),
                "CONCEPT_SOURCE" => self.concept_source = value.parse().map_err(invalid)?,
                "CONCEPT_URL" => self.concept_url = value,
                "REGISTRY_PATH" => self.registry_path = Some(value.into()),
                "SNAPSHOT_PATH" => self.snapshot_path = Some(value.into()),
                "CORS_ORIGIN" => self.cors_origin = (!value.is_empty()).then_some(value),
                "STATIC_DIR" => self.static_dir = Some(value.into()),
                "CANDIDATES" => {
                    self.candidates = value.parse().map_err(|e| invalid(format!("{e}")))?;
                }
                // RUST_LOG-style knobs and the like are not ours to police
                _ => tracing::debug!(key, "ignoring unknown environment override"),
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.backend == BackendKind::Remote && self.backend_url.is_none() {
            return Err(ConfigError::Invalid {
                key: "backend_url".into(),
                message: "required when backend = \"remote\"".into(),
            });
        }
        if self.candidates == 0 {
            return Err(ConfigError::Invalid {
                key: "candidates".into(),
                message: "must be at least 1".into(),
            });
        }
        Ok(())
    }

    /// Loads the registry and concept data and wires up the engine.
    pub fn build_engine(&self) -> Result<Engine, ConfigError> {
        self.validate()?;
        let registry = match &self.registry_path {
            Some(path) => AttributeRegistry::load(&read(path)?, true)?,
            None => AttributeRegistry::builtin(),
        };
        let registry = Arc::new(registry);
        let snapshot = match &self.snapshot_path {
            Some(path) => ConceptSnapshot::parse(&read(path)?)?,
            None => ConceptSnapshot::builtin(),
        };
        let concepts = match self.concept_source {
            ConceptSourceKind::Snapshot => ConceptClient::new(Box::new(snapshot)),
            ConceptSourceKind::Live => {
                ConceptClient::new(Box::new(LiveConceptSource::new(self.concept_url.clone())))
                    .with_fallback(snapshot)
            }
        };
        let backend: Arc<dyn GenerationBackend> = match self.backend {
            BackendKind::Stub => Arc::new(StubBackend::new(registry.clone())),
            BackendKind::Remote => Arc::new(RemoteBackend::new(
                self.backend_url.as_deref().expect("validated"),
            )),
        };
        let config = EngineConfig {
            candidates: self.candidates,
            ..EngineConfig::default()
        };
        Ok(Engine::new(registry, Arc::new(concepts), backend, config))
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(
            ServerConfig::from_toml("").unwrap(),
            ServerConfig::default()
        );
    }

    #[test]
    fn file_then_environment() {
        let mut cfg = ServerConfig::from_toml(
            "bind = \"0.0.0.0:9000\"\nstore_dir = \"/tmp/s\"\nconcept_source = \"live\"\n",
        )
        .unwrap();
        assert_eq!(cfg.concept_source, ConceptSourceKind::Live);
        cfg.apply_env([
            ("BOTSHAPE_CONCEPT_SOURCE", "snapshot"),
            ("BOTSHAPE_BIND", "127.0.0.1:1"),
            ("BOTSHAPE_CORS_ORIGIN", ""),
            ("HOME", "/root"),
        ])
        .unwrap();
        assert_eq!(cfg.concept_source, ConceptSourceKind::Snapshot);
        assert_eq!(cfg.bind, "127.0.0.1:1");
        assert_eq!(cfg.store_dir, PathBuf::from("/tmp/s"));
        assert_eq!(cfg.cors_origin, None);
    }

    #[test]
    fn bad_values_are_rejected() {
        assert!(ServerConfig::from_toml("backend = \"gpt\"").is_err());
        assert!(ServerConfig::from_toml("colour = 1").is_err());
        let mut cfg = ServerConfig::default();
        assert!(cfg.apply_env([("BOTSHAPE_BACKEND", "magic")]).is_err());
        cfg.backend = BackendKind::Remote;
        assert!(matches!(
            cfg.build_engine(),
            Err(ConfigError::Invalid { .. })
        ));
    }

    #[test]
    fn missing_registry_file_fails_startup() {
        let cfg = ServerConfig {
            registry_path: Some("/nonexistent/attributes.tsv".into()),
            ..ServerConfig::default()
        };
        assert!(matches!(cfg.build_engine(), Err(ConfigError::Read { .. })));
    }

    #[test]
    fn default_engine_is_offline() {
        let engine = ServerConfig::default().build_engine().unwrap();
        assert_eq!(engine.registry().len(), 31);
    }
}
