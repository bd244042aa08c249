use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use cpabe_enclave::attestation::{
    attest_and_provision, load_or_create_signing_key, Platform, Verifier, VerifierChannel, VerifierConfig,
};
use cpabe_enclave::{
    create_enclave, DeviceSecret, EnclaveClient, EnclaveConfig, EnclaveMeasurement, OcallHandler, SealedKeys,
};
use ed25519_dalek::VerifyingKey;

use crate::config::ServiceConfig;
use crate::remote::HttpVerifier;
use crate::storage::{Storage, StoredFile};
use crate::{now_ms, ServiceError};

pub const ENCLAVE_IDENTITY: &str = "cpabe-enclave";
pub const ENCLAVE_VERSION: u32 = 1;

pub(crate) struct Download {
    pub file_id: String,
    pub filename: String,
    pub expires: u64,
}

#[derive(Default)]
pub(crate) struct Tokens {
    pub live: HashMap<String, Download>,
    /// Redeemed or expired tokens, kept for a while so reuse answers 410.
    pub spent: HashMap<String, u64>,
}

pub(crate) struct AppState {
    pub config: ServiceConfig,
    pub client: EnclaveClient,
    pub storage: Arc<Storage>,
    pub platform: Platform,
    pub verifier: Option<Arc<Verifier>>,
    remote: Option<HttpVerifier>,
    pub vocabulary: RwLock<Option<Vec<String>>>,
    pub files: Mutex<BTreeMap<String, StoredFile>>,
    pub tokens: Mutex<Tokens>,
}

/// A running instance's state. Cheap to clone.
#[derive(Clone)]
pub struct Service {
    pub(crate) state: Arc<AppState>,
}

fn io_err(what: &str) -> impl Fn(std::io::Error) -> ServiceError + '_ {
    move |e| ServiceError::Storage(format!("{what}: {e}"))
}

impl Service {
    /// Opens storage, brings the enclave up from sealed blobs (or runs setup
    /// on first start) and, when no sealed policy exists, runs attestation
    /// and provisioning. Blocking.
    pub fn open(config: ServiceConfig) -> Result<Self, ServiceError> {
        let storage = Arc::new(Storage::open(&config.storage_dir).map_err(io_err("storage"))?);
        let secret_path = config.device_secret_path();
        let device = DeviceSecret::load_or_create(&secret_path).map_err(|e| ServiceError::Storage(e.to_string()))?;
        let quoting_key = load_or_create_signing_key(&config.platform_key_path()).map_err(io_err("platform key"))?;
        let platform = Platform::new(
            DeviceSecret::load(&secret_path).map_err(|e| ServiceError::Storage(e.to_string()))?,
            quoting_key,
        );
        let mut enclave_config = EnclaveConfig::new(ENCLAVE_IDENTITY, ENCLAVE_VERSION, device);
        let measurement = enclave_config.measurement();

        let (verifier, remote) = match (&config.verifier_url, &config.policy) {
            (Some(url), _) => {
                let key = config
                    .verifier_public_key
                    .as_deref()
                    .ok_or_else(|| ServiceError::Config("verifier_url needs verifier_public_key".into()))?;
                enclave_config = enclave_config.with_verifier(parse_verifying_key(key)?);
                (None, Some(HttpVerifier::new(url)?))
            }
            (None, Some(policy)) => {
                let identity = load_or_create_signing_key(&config.storage_dir.join("verifier.key"))
                    .map_err(io_err("verifier key"))?;
                enclave_config = enclave_config.with_verifier(identity.verifying_key());
                let vc = VerifierConfig::new(measurement, platform.verification_key(), policy);
                (Some(Arc::new(Verifier::new(vc, identity))), None)
            }
            (None, None) => (None, None),
        };

        let ocalls: Arc<dyn OcallHandler> = storage.clone();
        let client = EnclaveClient::new(Arc::new(create_enclave(enclave_config, ocalls)));

        let mut vocabulary = None;
        match storage.load_sealed_keys().map_err(io_err("sealed keys"))? {
            Some(keys) => {
                let policy = storage.load_sealed_policy().map_err(io_err("sealed policy"))?;
                let vocab = client.restore(&keys, policy.as_deref())?;
                log::info!("restored enclave state from sealed blobs");
                if policy.is_some() {
                    vocabulary = Some(vocab);
                }
            }
            None => {
                let keys: SealedKeys = client.setup()?;
                storage.save_sealed_keys(&keys).map_err(io_err("sealed keys"))?;
                log::info!("generated and sealed new master key");
            }
        }

        let files =
            storage.load_metadata().map_err(io_err("metadata"))?.into_iter().map(|f| (f.file_id.clone(), f)).collect();
        let service = Service {
            state: Arc::new(AppState {
                config,
                client,
                storage,
                platform,
                verifier,
                remote,
                vocabulary: RwLock::new(vocabulary),
                files: Mutex::new(files),
                tokens: Mutex::new(Tokens::default()),
            }),
        };
        if !service.is_ready() && service.has_verifier() {
            if let Err(e) = service.provision() {
                log::error!("policy provisioning failed, service not ready: {e}");
            }
        }
        Ok(service)
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.state.config
    }

    pub fn measurement(&self) -> EnclaveMeasurement {
        *self.state.client.enclave().measurement()
    }

    pub fn is_ready(&self) -> bool {
        self.state.vocabulary.read().expect("vocabulary lock").is_some()
    }

    /// Attribute vocabulary of the installed policy.
    pub fn attributes(&self) -> Option<Vec<String>> {
        self.state.vocabulary.read().expect("vocabulary lock").clone()
    }

    /// The built-in verifier, if this instance runs one.
    pub fn verifier(&self) -> Option<&Arc<Verifier>> {
        self.state.verifier.as_ref()
    }

    fn has_verifier(&self) -> bool {
        self.state.verifier.is_some() || self.state.remote.is_some()
    }

    /// Runs a fresh attestation round and installs whatever policy the
    /// verifier hands out. Blocking.
    pub fn provision(&self) -> Result<Vec<String>, ServiceError> {
        let st = &self.state;
        let channel: &dyn VerifierChannel = match (&st.verifier, &st.remote) {
            (Some(v), _) => v.as_ref(),
            (None, Some(r)) => r,
            (None, None) => return Err(ServiceError::Config("no verifier configured".into())),
        };
        let provisioned = attest_and_provision(&st.client, &st.platform, channel)?;
        st.storage.save_sealed_policy(&provisioned.sealed).map_err(io_err("sealed policy"))?;
        log::info!("policy provisioned ({} attributes)", provisioned.vocabulary.len());
        *st.vocabulary.write().expect("vocabulary lock") = Some(provisioned.vocabulary.clone());
        Ok(provisioned.vocabulary)
    }

    /// Drops expired download tokens and their staged plaintext.
    pub fn sweep(&self) {
        let now = now_ms();
        let ttl = self.state.config.token_ttl().as_millis() as u64;
        let mut tokens = self.state.tokens.lock().expect("token lock");
        let expired: Vec<String> =
            tokens.live.iter().filter(|(_, d)| d.expires <= now).map(|(t, _)| t.clone()).collect();
        for token in expired {
            tokens.live.remove(&token);
            if let Err(e) = std::fs::remove_file(self.state.storage.staging_path(&token)) {
                log::warn!("cannot remove expired staging file: {e}");
            }
            tokens.spent.insert(token, now);
        }
        tokens.spent.retain(|_, at| now.saturating_sub(*at) <= ttl.max(Duration::from_secs(60).as_millis() as u64));
    }
}

fn parse_verifying_key(hex_key: &str) -> Result<VerifyingKey, ServiceError> {
    let bytes: [u8; 32] = hex::decode(hex_key.trim())
        .ok()
        .and_then(|b| b.try_into().ok())
        .ok_or_else(|| ServiceError::Config("verifier_public_key must be 32 hex-encoded bytes".into()))?;
    VerifyingKey::from_bytes(&bytes).map_err(|e| ServiceError::Config(format!("verifier_public_key: {e}")))
}
