//! HTTP front end for enclave-backed file encryption.
//!
//! Uploads are encrypted inside the enclave under the provisioned policy and
//! stored as ciphertext containers. Decryption requests name a file and a
//! set of attributes; the enclave decides, and on success the plaintext is
//! staged for a single download.
//!
//! | Route | |
//! |---|---|
//! | `POST /encrypt-sgx` | multipart `file` → `{file_id, filename, size}` |
//! | `POST /decrypt-sgx` | `{file_id, attributes}` → `{download_token}` |
//! | `GET /files` | stored files, newest first |
//! | `GET /download/{token}` | staged plaintext, once |
//! | `GET /attributes` | attribute vocabulary of the policy |
//! | `GET /status` | readiness and measurement |
//! | `POST /provision` | rerun attestation and provisioning |
//! | `POST /attest/challenge`, `POST /attest/quote` | built-in verifier |

mod app;
mod config;
mod remote;
mod routes;
mod storage;

use std::net::SocketAddr;
use std::time::{SystemTime, UNIX_EPOCH};

use cpabe_enclave::attestation::AttestationError;
use cpabe_enclave::EnclaveError;
use thiserror::Error;

pub use app::{Service, ENCLAVE_IDENTITY, ENCLAVE_VERSION};
pub use config::{ServiceConfig, DEFAULT_MAX_UPLOAD};
pub use remote::HttpVerifier;
pub use routes::router;
pub use storage::{write_atomic, Storage, StoredFile};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("storage: {0}")]
    Storage(String),
    #[error("enclave: {0}")]
    Enclave(#[from] EnclaveError),
    #[error("attestation: {0}")]
    Attestation(#[from] AttestationError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub(crate) fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

/// Serves `service` on an already bound listener until the task is dropped.
pub async fn serve(service: Service, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(service)).await
}

/// Opens the service and serves it on `0.0.0.0:<port>`. Blocks.
pub fn run(config: ServiceConfig) -> Result<(), ServiceError> {
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    let service = Service::open(config)?;
    let addr = SocketAddr::from(([0, 0, 0, 0], service.config().port));
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        log::info!("listening on {addr}, measurement {}", service.measurement());
        serve(service, listener).await
    })?;
    Ok(())
}
