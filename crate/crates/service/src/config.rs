use std::env;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;

use crate::ServiceError;

pub const DEFAULT_MAX_UPLOAD: usize = 100 * 1024 * 1024;

/// Service settings. Loaded from an optional TOML file, then overridden by
/// `CPABE_*` environment variables.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub port: u16,
    pub storage_dir: PathBuf,
    /// Defaults to `<storage_dir>/device.secret`.
    pub device_secret_path: Option<PathBuf>,
    /// Platform quoting key seed. Defaults to `<storage_dir>/platform.key`.
    pub platform_key_path: Option<PathBuf>,
    /// Remote verifier base URL. When unset the service runs its own
    /// verifier, which needs `policy`.
    pub verifier_url: Option<String>,
    /// Hex Ed25519 key the remote verifier signs provisioning responses with.
    pub verifier_public_key: Option<String>,
    /// Policy handed out by the built-in verifier.
    pub policy: Option<String>,
    pub max_upload_bytes: usize,
    pub token_ttl_secs: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            port: 8080,
            storage_dir: PathBuf::from("data"),
            device_secret_path: None,
            platform_key_path: None,
            verifier_url: None,
            verifier_public_key: None,
            policy: None,
            max_upload_bytes: DEFAULT_MAX_UPLOAD,
            token_ttl_secs: 300,
        }
    }
}

fn env_var(name: &str) -> Option<String> {
    env::var(name).ok().filter(|v| !v.is_empty())
}

fn parse_env<T: std::str::FromStr>(name: &str) -> Result<Option<T>, ServiceError> {
    env_var(name)
        .map(|v| v.parse().map_err(|_| ServiceError::Config(format!("{name}: cannot parse {v:?}"))))
        .transpose()
}

impl ServiceConfig {
    pub fn for_storage(dir: impl Into<PathBuf>) -> Self {
        Self { storage_dir: dir.into(), ..Self::default() }
    }

    pub fn from_file(path: &Path) -> Result<Self, ServiceError> {
        let text = fs::read_to_string(path).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))
    }

    /// File (if any) then environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ServiceError> {
        let mut config = match path {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        config.apply_env()?;
        Ok(config)
    }

    pub fn apply_env(&mut self) -> Result<(), ServiceError> {
        if let Some(v) = parse_env("CPABE_PORT")? {
            self.port = v;
        }
        if let Some(v) = env_var("CPABE_STORAGE_DIR") {
            self.storage_dir = v.into();
        }
        if let Some(v) = env_var("CPABE_DEVICE_SECRET") {
            self.device_secret_path = Some(v.into());
        }
        if let Some(v) = env_var("CPABE_PLATFORM_KEY") {
            self.platform_key_path = Some(v.into());
        }
        if let Some(v) = env_var("CPABE_VERIFIER_URL") {
            self.verifier_url = Some(v);
        }
        if let Some(v) = env_var("CPABE_VERIFIER_KEY") {
            self.verifier_public_key = Some(v);
        }
        if let Some(v) = env_var("CPABE_POLICY") {
            self.policy = Some(v);
        }
        if let Some(v) = parse_env("CPABE_MAX_UPLOAD")? {
            self.max_upload_bytes = v;
        }
        if let Some(v) = parse_env("CPABE_TOKEN_TTL")? {
            self.token_ttl_secs = v;
        }
        Ok(())
    }

    pub fn device_secret_path(&self) -> PathBuf {
        self.device_secret_path.clone().unwrap_or_else(|| self.storage_dir.join("device.secret"))
    }

    pub fn platform_key_path(&self) -> PathBuf {
        self.platform_key_path.clone().unwrap_or_else(|| self.storage_dir.join("platform.key"))
    }

    pub fn token_ttl(&self) -> Duration {
        Duration::from_secs(self.token_ttl_secs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_fields_and_defaults() {
        let c: ServiceConfig = toml::from_str("port = 9000\npolicy = \"a b 1of2\"\n").unwrap();
        assert_eq!(c.port, 9000);
        assert_eq!(c.policy.as_deref(), Some("a b 1of2"));
        assert_eq!(c.max_upload_bytes, DEFAULT_MAX_UPLOAD);
        assert_eq!(c.device_secret_path(), PathBuf::from("data/device.secret"));
        assert!(toml::from_str::<ServiceConfig>("prot = 1").is_err());
    }
}
