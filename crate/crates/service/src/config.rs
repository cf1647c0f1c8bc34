use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use thiserror::Error;

use crate::store::{EventStore, FileStore, MemoryStore, StoreError};

pub const ENV_LISTEN: &str = "TRANSITION_LISTEN";
pub const ENV_STORAGE: &str = "TRANSITION_STORAGE";
pub const ENV_SECRET: &str = "TRANSITION_RESEARCH_SECRET";

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";
pub const DEFAULT_STORAGE: &str = "./transition-data";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{ENV_LISTEN}={value:?} is not a socket address")]
    Listen { value: String },
    #[error("{ENV_STORAGE} must not be empty")]
    EmptyStorage,
}

/// Where session logs go.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Storage {
    /// Volatile, lost on exit.
    Memory,
    /// Append-only JSON-lines files under a directory.
    Files(PathBuf),
}

impl Storage {
    pub fn parse(raw: &str) -> Result<Storage, ConfigError> {
        match raw.trim() {
            "" => Err(ConfigError::EmptyStorage),
            "memory" | "memory:" => Ok(Storage::Memory),
            other => Ok(Storage::Files(PathBuf::from(other.strip_prefix("file:").unwrap_or(other)))),
        }
    }

    pub fn open(&self) -> Result<Arc<dyn EventStore>, StoreError> {
        Ok(match self {
            Storage::Memory => Arc::new(MemoryStore::new()),
            Storage::Files(path) => Arc::new(FileStore::open(path)?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerConfig {
    pub listen: SocketAddr,
    pub storage: Storage,
    /// Shared secret for the research export; the export is closed when unset.
    pub research_secret: Option<String>,
}

impl ServerConfig {
    pub fn from_env() -> Result<ServerConfig, ConfigError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    /// Builds the configuration from any key lookup, so tests need not touch
    /// the process environment.
    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<ServerConfig, ConfigError> {
        let listen_raw = get(ENV_LISTEN).unwrap_or_else(|| DEFAULT_LISTEN.into());
        let listen = listen_raw
            .parse()
            .map_err(|_| ConfigError::Listen { value: listen_raw.clone() })?;
        let storage = Storage::parse(&get(ENV_STORAGE).unwrap_or_else(|| DEFAULT_STORAGE.into()))?;
        let research_secret = get(ENV_SECRET).filter(|s| !s.is_empty());
        Ok(ServerConfig {
            listen,
            storage,
            research_secret,
        })
    }
}
